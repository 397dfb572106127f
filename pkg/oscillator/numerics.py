"""
ParamLab Numerics — shared numerical substrate for every other module.

Provides:
  - SpatialGrid / GridFunction: uniform discretization of the x axis
  - integrate_grid: composite Simpson over a grid (the <.|.> of all states)
  - derivative: 4th-order central finite differences
  - quad_nd: adaptive Gauss-Kronrod quadrature in 1 or 2 dimensions,
    the ground-truth oracle of the Hermite overlap formula

Units everywhere: hbar = m = omega(0) = 1, double precision.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import IntegrationWarning, nquad, simpson

from config import get_settings


# =====================================================================
# Exceptions
# =====================================================================

class LabError(Exception):
    """Root of every error raised by the laboratory."""
    pass


class InputError(LabError, ValueError):
    """Raised for invalid parameters or violated construction invariants."""
    pass


class NumericalError(LabError):
    """Raised when a numerical stage fails (non-convergence, overflow...)."""
    pass


class NonFiniteError(NumericalError):
    """Raised when a NaN or infinity shows up where finite values are required."""
    pass


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach its tolerance within the budget."""

    def __init__(self, message: str, value: complex, error: float):
        super().__init__(f"{message} (best estimate {value!r}, error bound {error:.3e})")
        self.value = value
        self.error = error


# =====================================================================
# Grids
# =====================================================================

MIN_GRID_POINTS = 16


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_k = x_min + k*h, k = 0..n_points-1."""
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise InputError(f"Grid bounds must be finite, got [{self.x_min}, {self.x_max}]")
        if self.x_min >= self.x_max:
            raise InputError(f"Grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_points) != self.n_points or self.n_points < MIN_GRID_POINTS:
            raise InputError(f"Grid needs at least {MIN_GRID_POINTS} points, got {self.n_points}")

    @classmethod
    def centered(cls, center: float, half_width: float, n_points: int) -> "SpatialGrid":
        return cls(center - half_width, center + half_width, int(n_points))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n_points)

    def coarsened(self) -> "SpatialGrid":
        """Every other point of this grid (same left edge, step 2h)."""
        n = (self.n_points - 1) // 2 + 1
        return SpatialGrid(self.x_min, self.x_min + 2 * self.spacing * (n - 1), n)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples of a function on a SpatialGrid."""
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise InputError(
                f"GridFunction has {values.shape} values for a grid of {self.grid.n_points} points"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("GridFunction values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: SpatialGrid, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, func(grid.points))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _require_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _require_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def scaled(self, factor: complex) -> "GridFunction":
        return GridFunction(self.grid, factor * self.values)


def _require_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise InputError(f"Grid mismatch: {f.grid} vs {g.grid}")


# =====================================================================
# Grid quadrature and differentiation
# =====================================================================

def integrate_grid(f: GridFunction) -> complex:
    """
    Composite Simpson integral of f over [x_min, x_max].

    An even number of points leaves one panel over; it is closed with the
    trapezoid rule on the last panel.
    """
    values = f.values
    h = f.grid.spacing
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("integrate_grid received non-finite values")

    if f.grid.n_points % 2 == 1:
        return complex(simpson(values, dx=h))

    head = simpson(values[:-1], dx=h)
    tail = 0.5 * h * (values[-2] + values[-1])
    return complex(head + tail)


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """<f|g> = integral of conj(f) * g."""
    _require_same_grid(f, g)
    return integrate_grid(GridFunction(f.grid, np.conj(f.values) * g.values))


def l2_norm(f: GridFunction) -> float:
    return math.sqrt(max(integrate_grid(GridFunction(f.grid, np.abs(f.values) ** 2)).real, 0.0))


def derivative(f: GridFunction, order: int = 1) -> GridFunction:
    """4th-order finite-difference derivative (order 1 or 2)."""
    if order not in (1, 2):
        raise InputError(f"Only first and second derivatives are supported, got order={order}")
    return GridFunction(f.grid, _fd_derivative(f.values, f.grid.spacing, order))


def _fd_derivative(v: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    out = np.empty_like(v)
    if order == 1:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        # one-sided 4th-order stencils at the edges
        out[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
        out[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
        out[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
        out[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
        return out

    h2 = h * h
    out[2:-2] = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h2)
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h2
    out[1] = (v[0] - 2 * v[1] + v[2]) / h2
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h2
    out[-2] = (v[-1] - 2 * v[-2] + v[-3]) / h2
    return out


# =====================================================================
# Adaptive quadrature oracle
# =====================================================================

@dataclass(frozen=True)
class QuadratureResult:
    """Adaptive quadrature outcome."""
    value: complex
    error: float          # estimated absolute error (real + imaginary parts)
    converged: bool


def gaussian_box(
    center: Sequence[float],
    precision: np.ndarray,
    sigmas: Optional[float] = None,
) -> Tuple[Tuple[float, float], ...]:
    """
    Per-axis bounds for a Gaussian exp(-x P x) centered at `center`.

    Half-width is `sigmas` standard deviations of the widest direction.
    """
    sigmas = get_settings().quad_box_sigmas if sigmas is None else sigmas
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    lam_min = float(np.min(np.linalg.eigvalsh(0.5 * (precision + precision.T))))
    if lam_min <= 0:
        raise InputError("Gaussian weight must be positive definite to size a quadrature box")
    half = sigmas / math.sqrt(2.0 * lam_min)
    return tuple((float(c) - half, float(c) + half) for c in np.atleast_1d(center))


def quad_nd(
    integrand: Callable[..., complex],
    n_dims: int,
    box: Sequence[Tuple[float, float]],
    tol: Optional[float] = None,
    rel_tol: float = 1e-12,
    limit: Optional[int] = None,
    strict: bool = True,
) -> QuadratureResult:
    """
    Nested adaptive Gauss-Kronrod quadrature for N = 1 or 2.

    The integrand takes N scalar arguments (x0, x1...) and may return a
    complex number; real and imaginary parts are integrated separately.
    Raises QuadratureError when the error bound is not met and `strict`.
    """
    settings = get_settings()
    tol = settings.quad_tol if tol is None else tol
    limit = settings.quad_limit if limit is None else limit

    if n_dims not in (1, 2):
        raise InputError(f"quad_nd supports N in {{1, 2}}, got {n_dims}")
    if len(box) != n_dims:
        raise InputError(f"Box has {len(box)} axes for N={n_dims}")

    ranges = [tuple(map(float, b)) for b in box]
    opts = {"epsabs": tol / 2, "epsrel": rel_tol, "limit": limit}

    center = [0.5 * (a + b) for a, b in ranges]
    components = (np.real, np.imag) if np.iscomplexobj(integrand(*center)) else (np.real,)

    parts = [0.0, 0.0]
    errors = [0.0, 0.0]
    warned = False
    for i, part in enumerate(components):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IntegrationWarning)
            value, err = nquad(lambda *x: float(part(integrand(*x))), ranges, opts=[opts] * n_dims)
        warned = warned or any(issubclass(w.category, IntegrationWarning) for w in caught)
        parts[i] = value
        errors[i] = err

    value = complex(parts[0], parts[1])
    error = float(errors[0] + errors[1])
    converged = (not warned) and error <= max(tol, rel_tol * abs(value))

    if not converged:
        logger.warning(f"quad_nd (N={n_dims}) did not converge: value={value}, error={error:.3e}, tol={tol:.1e}")
        if strict:
            raise QuadratureError("Adaptive quadrature exceeded its subdivision budget", value, error)

    return QuadratureResult(value=value, error=error, converged=converged)
