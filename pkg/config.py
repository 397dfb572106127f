"""
Application configuration using pydantic-settings.

All numerical defaults are loaded from environment variables (or a local
.env file). Library functions take explicit keyword overrides; these
settings only supply the defaults.
"""

from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


SOLVER_METHODS = ("DOP853", "RK45")


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = Field(
        default="INFO",
        description="Logging level",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        return str(v).strip().upper() if v else "INFO"

    # Mode-function solver
    solver_tol: float = Field(
        default=1e-10,
        ge=1e-13,
        le=1e-6,
        description="Local error tolerance of the epsilon(t) integrator",
    )

    solver_method: str = Field(
        default="DOP853",
        description="Embedded Runge-Kutta pair used by solve_ivp",
    )

    @field_validator("solver_method", mode="before")
    @classmethod
    def check_solver_method(cls, v: str) -> str:
        v = str(v).strip().upper()
        if v not in SOLVER_METHODS:
            raise ValueError(f"solver_method must be one of {SOLVER_METHODS}, got {v}")
        return v

    wronskian_tol: float = Field(
        default=1e-8,
        gt=0.0,
        description="Wronskian certification tolerance of a TrajectorySample",
    )

    # Spatial grids
    grid_points: int = Field(
        default=2048,
        ge=16,
        description="Minimum number of points of an auto-sized grid",
    )

    grid_halfwidth_sigmas: float = Field(
        default=10.0,
        gt=0.0,
        description="Auto-sized half-width in units of the position spread",
    )

    grid_step_scale: float = Field(
        default=0.06,
        gt=0.0,
        le=1.0,
        description="Resolution policy: h <= scale / (|p| + 6 sqrt(sigma_p))",
    )

    grid_max_points: int = Field(
        default=65537,
        ge=16,
        description="Hard ceiling on auto-sized grid points",
    )

    grid_edge_threshold: float = Field(
        default=1e-10,
        gt=0.0,
        description="Edge magnitude (relative to peak) above which a grid is inadequate",
    )

    # Quadrature oracle
    quad_tol: float = Field(
        default=1e-10,
        gt=0.0,
        description="Absolute error target of the adaptive quadrature oracle",
    )

    quad_limit: int = Field(
        default=200,
        ge=10,
        description="Subdivision budget of the adaptive quadrature",
    )

    quad_box_sigmas: float = Field(
        default=8.0,
        gt=0.0,
        description="Default box half-width in standard deviations of the dominant Gaussian",
    )

    # Fock space
    fock_n_max: int = Field(
        default=64,
        ge=8,
        le=512,
        description="Default truncation of Fock vectors and ladder matrices",
    )

    # Output
    csv_digits: int = Field(
        default=15,
        ge=12,
        le=17,
        description="Significant digits written to CSV tables",
    )

    # Concurrency
    max_workers: int = Field(
        default=4,
        ge=1,
        le=64,
        description="Concurrent state requests evaluated by a scenario run",
    )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
