"""
Pydantic v2 scenario schema for ParamLab runs.

Strict parsing: unknown keys anywhere abort the run before any
computation. Parameter bounds are enforced by building the domain
objects during validation, so a scenario that parses is runnable.
"""

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from oscillator.numerics import InputError, LabError, SpatialGrid
from oscillator.trajectory import FrequencyProfile
from oscillator.mvhermite import OverlapSpec


class ScenarioError(LabError):
    """Scenario file is unreadable or violates the schema."""
    pass


OutputKind = Literal["trajectory_csv", "squeezing_csv", "wavefunction_csv", "qreport_json", "overlap_json"]
OUTPUT_KINDS = get_args(OutputKind)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ProfileModel(_Strict):
    """Frequency profile description."""

    kind: Literal["constant", "free", "step", "modulated", "tabulated"]
    omega0: float = 1.0
    omega1: Optional[float] = None
    t_switch: float = 0.0
    kappa: Optional[float] = None
    nu: Optional[float] = None
    times: Optional[List[float]] = None
    omega_sq: Optional[List[float]] = None

    def build(self) -> FrequencyProfile:
        if self.kind == "constant":
            return FrequencyProfile.constant(self.omega0)
        if self.kind == "free":
            return FrequencyProfile.free()
        if self.kind == "step":
            if self.omega1 is None:
                raise InputError("step profile needs omega1")
            return FrequencyProfile.step(self.omega1, self.t_switch)
        if self.kind == "modulated":
            if self.kappa is None or self.nu is None:
                raise InputError("modulated profile needs kappa and nu")
            return FrequencyProfile.modulated(self.kappa, self.nu)
        if self.times is None or self.omega_sq is None:
            raise InputError("tabulated profile needs times and omega_sq")
        return FrequencyProfile.tabulated(self.times, self.omega_sq)

    @model_validator(mode="after")
    def check_buildable(self) -> "ProfileModel":
        try:
            self.build()
        except InputError as e:
            raise ValueError(str(e))
        return self


class GridModel(_Strict):
    x_min: float
    x_max: float
    n_points: int

    def build(self) -> SpatialGrid:
        return SpatialGrid(self.x_min, self.x_max, self.n_points)

    @model_validator(mode="after")
    def check_buildable(self) -> "GridModel":
        try:
            self.build()
        except InputError as e:
            raise ValueError(str(e))
        return self


class StateRequest(_Strict):
    """One wavefunction to build; alpha is given as [re, im]."""

    kind: Literal["ground", "coherent", "number", "cat", "qcoherent"]
    alpha: Tuple[float, float] = (0.0, 0.0)
    n: Optional[int] = Field(default=None, ge=0, le=60)
    parity: Optional[Literal["even", "odd"]] = None
    lam: Optional[float] = Field(default=None, alias="lambda", ge=0.0, le=5.0)
    n_max: Optional[int] = Field(default=None, ge=8, le=512)
    t: Optional[float] = Field(default=None, ge=0.0, description="Evaluation time (default t_end)")

    @property
    def alpha_complex(self) -> complex:
        return complex(self.alpha[0], self.alpha[1])

    @model_validator(mode="after")
    def check_parameters(self) -> "StateRequest":
        if self.kind == "number" and self.n is None:
            raise ValueError("number state needs n")
        if self.kind == "cat" and self.parity is None:
            raise ValueError("cat state needs parity")
        if self.kind == "qcoherent" and self.lam is None:
            raise ValueError("qcoherent state needs lambda")
        if abs(self.alpha_complex) > 6.0:
            raise ValueError(f"|alpha| must be <= 6, got {abs(self.alpha_complex):.3f}")
        return self

    @property
    def label(self) -> str:
        if self.kind == "number":
            return f"number_n{self.n}"
        if self.kind == "cat":
            return f"{self.parity}_cat"
        return self.kind


class QDeformRequest(_Strict):
    lam: float = Field(alias="lambda", ge=0.0, le=5.0)
    n_max: int = Field(default=64, ge=8, le=512)
    alpha: Optional[Tuple[float, float]] = None


class OverlapRequest(_Strict):
    """Gaussian overlap parameters (matrices row-major) plus the indices to evaluate."""

    R_her: List[List[float]]
    r_her: List[List[float]]
    Lambda: List[List[float]]
    M_quad: List[List[float]]
    c: List[float]
    d: List[float]
    n: List[int]
    m: List[int]
    convention: Literal["resolved", "printed"] = "resolved"
    order: Literal["nm", "mn"] = "nm"

    def build(self) -> OverlapSpec:
        return OverlapSpec.from_dict(self.model_dump(include={"R_her", "r_her", "Lambda", "M_quad", "c", "d"}))

    @model_validator(mode="after")
    def check_buildable(self) -> "OverlapRequest":
        try:
            spec = self.build()
        except InputError as e:
            raise ValueError(str(e))
        if len(self.n) != spec.dim or len(self.m) != spec.dim:
            raise ValueError(f"n and m must have {spec.dim} entries")
        if any(v < 0 for v in self.n + self.m):
            raise ValueError("n and m entries must be non-negative")
        return self


class Scenario(_Strict):
    """A full reproducible run."""

    profile: ProfileModel
    t_end: float = Field(gt=0.0)
    dt_out: float = Field(gt=0.0)
    solver_tol: float = Field(default=1e-10, ge=1e-13, le=1e-6)
    states: List[StateRequest] = Field(default_factory=list)
    grid: Optional[GridModel] = None
    qdeform: Optional[QDeformRequest] = None
    overlap: Optional[OverlapRequest] = None
    outputs: List[OutputKind] = Field(min_length=1)

    @field_validator("outputs")
    @classmethod
    def unique_outputs(cls, v: List[str]) -> List[str]:
        if len(set(v)) != len(v):
            raise ValueError("outputs must not repeat")
        return v

    @model_validator(mode="after")
    def check_requests(self) -> "Scenario":
        if "wavefunction_csv" in self.outputs and not self.states:
            raise ValueError("wavefunction_csv needs at least one entry in states")
        if "qreport_json" in self.outputs and self.qdeform is None:
            raise ValueError("qreport_json needs a qdeform section")
        if "overlap_json" in self.outputs and self.overlap is None:
            raise ValueError("overlap_json needs an overlap section")
        if self.dt_out > self.t_end:
            raise ValueError(f"dt_out={self.dt_out} exceeds t_end={self.t_end}")
        for state in self.states:
            if state.t is not None and state.t > self.t_end:
                raise ValueError(f"state time t={state.t} exceeds t_end={self.t_end}")
        return self

    @property
    def needs_trajectory(self) -> bool:
        return bool(self.states) or any(o in self.outputs for o in ("trajectory_csv", "squeezing_csv"))

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_scenario(data: dict) -> Scenario:
    """Validate a scenario mapping; ScenarioError names the offending field."""
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {_describe(e)}")


def load_scenario(path: Path) -> Tuple[Scenario, str]:
    """Read and validate a scenario file; returns it with the sha256 of the file bytes."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ScenarioError(f"Cannot read scenario {path}: {e}")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Scenario {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ScenarioError(f"Scenario {path} must be a JSON object")
    return parse_scenario(data), hashlib.sha256(raw).hexdigest()
