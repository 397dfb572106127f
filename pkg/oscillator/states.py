"""
ParamLab States — exact wavefunctions of the parametric oscillator.

All states are closed forms in eps(t), eps'(t) of a TrajectorySample:

    ground      Psi_0 = pi^(-1/4) eps^(-1/2) exp(i eps' x^2 / (2 eps))
    coherent    Psi_0 exp(-|a|^2/2 - a^2 eps*/(2 eps) + sqrt(2) a x / eps)
    number      Psi_0 (eps*/(2 eps))^(n/2) H_n(x/|eps|) / sqrt(n!)
    even/odd    2 N Psi_0 exp(-|a|^2/2 - a^2 eps*/(2 eps)) cosh/sinh(sqrt(2) a x / eps)

Fractional powers of eps use the continuously tracked phase carried by
the sample. The integral of motion

    A = (i/sqrt(2)) (eps p - eps' x)

is applied with 4th-order finite differences to certify eigenproperties.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from config import get_settings
from oscillator.numerics import (
    GridFunction,
    InputError,
    NumericalError,
    SpatialGrid,
    integrate_grid,
    inner_product,
    l2_norm,
    _fd_derivative,
)
from oscillator.trajectory import EpsilonTrajectory, TrajectorySample


# =====================================================================
# Exceptions
# =====================================================================

class GridAdequacyError(NumericalError):
    """The state does not decay to the grid edges."""
    pass


class GridResolutionError(NumericalError):
    """Grid too coarse: derivative or normalization noise above tolerance."""
    pass


class TruncationError(NumericalError):
    """A Fock vector is not normalized or its tail is not negligible."""
    pass


# =====================================================================
# Constants
# =====================================================================

PI_QUARTER = math.pi ** -0.25

MAX_ALPHA = 6.0
MIN_ODD_ALPHA = 1e-3
MAX_NUMBER = 60
MIN_FOCK_N_MAX = 8

NORM_TOL = 1e-6
FOCK_NORM_TOL = 1e-8
FOCK_TAIL_TOL = 1e-10
DERIVATIVE_NOISE_TOL = 1e-5
SQUEEZING_MARGIN = 1e-8    # sigma_x below 1/2 by less than this is solver noise


# =====================================================================
# Data classes
# =====================================================================

@dataclass(frozen=True, eq=False)
class WaveFunction(GridFunction):
    """Psi(x, t) on a grid at one trajectory sample."""
    sample: Optional[TrajectorySample] = None
    label: str = "synthesized"

    def __post_init__(self):
        super().__post_init__()
        if self.sample is None:
            raise InputError("WaveFunction needs the trajectory sample it was built at")

    @property
    def norm(self) -> float:
        return l2_norm(self) ** 2


@dataclass(frozen=True)
class MomentSummary:
    """First and second moments of a state, with uncertainty diagnostics."""
    mean_x: float
    mean_p: float
    sigma_x: float               # position variance
    sigma_p: float               # momentum variance
    sigma_xp: float              # symmetrized covariance
    corr: float                  # sigma_xp / sqrt(sigma_x sigma_p)
    uncertainty_product: float   # sigma_x sigma_p
    schrodinger_residual: float  # |sigma_x sigma_p (1 - corr^2) - 1/4|

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_p > 0):
            raise NumericalError(f"Variances must be positive, got sigma_x={self.sigma_x}, sigma_p={self.sigma_p}")
        if not self.corr ** 2 < 1:
            raise NumericalError(f"Correlation coefficient must lie in (-1, 1), got {self.corr}")

    @classmethod
    def from_second_moments(
        cls, mean_x: float, mean_p: float, sigma_x: float, sigma_p: float, sigma_xp: float,
    ) -> "MomentSummary":
        corr = sigma_xp / math.sqrt(sigma_x * sigma_p) if sigma_x > 0 and sigma_p > 0 else 0.0
        product = sigma_x * sigma_p
        return cls(
            mean_x=mean_x,
            mean_p=mean_p,
            sigma_x=sigma_x,
            sigma_p=sigma_p,
            sigma_xp=sigma_xp,
            corr=corr,
            uncertainty_product=product,
            schrodinger_residual=abs(product * (1.0 - corr ** 2) - 0.25),
        )

    @property
    def robertson_defect(self) -> float:
        """sigma_x sigma_p - sigma_xp^2 - 1/4 (non-negative for every state)."""
        return self.sigma_x * self.sigma_p - self.sigma_xp ** 2 - 0.25

    @property
    def squeezed(self) -> bool:
        return self.sigma_x < 0.5 - SQUEEZING_MARGIN


@dataclass(frozen=True, eq=False)
class FockVector:
    """Coefficients c_n = <Psi_n|state> for n = 0..n_max."""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 1 or len(coeffs) < MIN_FOCK_N_MAX + 1:
            raise InputError(f"FockVector needs n_max >= {MIN_FOCK_N_MAX}, got {len(coeffs) - 1}")
        if not np.all(np.isfinite(coeffs)):
            raise NumericalError("FockVector coefficients must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    @property
    def mean_number(self) -> float:
        return float(np.sum(np.arange(len(self.coeffs)) * np.abs(self.coeffs) ** 2))

    @property
    def effective_n(self) -> int:
        """Largest n carrying a non-negligible coefficient."""
        mags = np.abs(self.coeffs)
        significant = np.nonzero(mags > 1e-12 * mags.max())[0]
        return int(significant[-1]) if len(significant) else 0

    def check(self) -> "FockVector":
        """Raise TruncationError unless normalized with a negligible tail."""
        if abs(self.norm_squared - 1.0) > FOCK_NORM_TOL:
            raise TruncationError(f"Fock vector norm^2 = {self.norm_squared:.12f}, expected 1")
        if abs(self.coeffs[-1]) >= FOCK_TAIL_TOL:
            raise TruncationError(f"Fock tail |c_{self.n_max}| = {abs(self.coeffs[-1]):.2e} is not negligible")
        return self


@dataclass(frozen=True, eq=False)
class SqueezingSeries:
    """Analytic moments along a trajectory, plus the refined minimum of sigma_x."""
    times: np.ndarray
    sigma_x: np.ndarray
    sigma_p: np.ndarray
    corr: np.ndarray
    squeezed: np.ndarray
    t_min: float
    min_sigma_x: float

    @property
    def any_squeezed(self) -> bool:
        return bool(np.any(self.squeezed))


# =====================================================================
# Helpers
# =====================================================================

def eps_power(sample: TrajectorySample, exponent: float) -> complex:
    """eps^exponent on the branch fixed by the tracked phase."""
    return sample.abs_eps ** exponent * complex(math.cos(exponent * sample.phase), math.sin(exponent * sample.phase))


def _chirp_exponent(sample: TrajectorySample) -> complex:
    return 1j * sample.deps / (2.0 * sample.eps)


def grid_for_state(
    sample: TrajectorySample,
    alpha: complex = 0j,
    n_quanta: int = 0,
    centered: bool = False,
) -> SpatialGrid:
    """
    Auto-sized grid for a state built on `sample`.

    Position spread is that of the n-th number state, sigma_x = (2n+1)|eps|^2/2;
    the packet (or both cat components) sits at +-sqrt(2) Re(eps* alpha).
    The step resolves the local wavenumber |<p>| + 6 sqrt(sigma_p) plus the
    chirp Re(eps'/eps) x at the far edge of the box.
    """
    settings = get_settings()
    alpha = complex(alpha)
    width = 2 * n_quanta + 1
    sigma_x = width * sample.abs_eps ** 2 / 2
    sigma_p = width * abs(sample.deps) ** 2 / 2
    x_disp = math.sqrt(2.0) * (np.conj(sample.eps) * alpha).real
    p_disp = math.sqrt(2.0) * (np.conj(sample.deps) * alpha).real

    spread = settings.grid_halfwidth_sigmas * math.sqrt(sigma_x)
    if centered:
        center, half = x_disp, spread
    else:
        center, half = 0.0, spread + abs(x_disp)

    chirp_k = abs((sample.deps / sample.eps).real) * (abs(center) + half)
    h_max = settings.grid_step_scale / (abs(p_disp) + chirp_k + 6.0 * math.sqrt(sigma_p))
    n_points = max(settings.grid_points, int(math.ceil(2 * half / h_max)) + 1)
    if n_points > settings.grid_max_points:
        logger.debug(f"grid_for_state: {n_points} points wanted at t={sample.t}, capped at {settings.grid_max_points}")
        n_points = settings.grid_max_points
    if n_points % 2 == 0:
        n_points += 1
    return SpatialGrid.centered(center, half, n_points)


def _check_edges(values: np.ndarray, label: str) -> None:
    threshold = get_settings().grid_edge_threshold
    peak = float(np.max(np.abs(values)))
    edge = max(abs(values[0]), abs(values[-1]))
    if peak == 0 or edge > threshold * peak:
        raise GridAdequacyError(
            f"{label}: edge magnitude {edge:.2e} exceeds {threshold:.0e} of peak {peak:.2e}; widen the grid"
        )


def _finalize(
    values: np.ndarray,
    grid: SpatialGrid,
    sample: TrajectorySample,
    label: str,
    renormalize: bool = False,
) -> WaveFunction:
    _check_edges(values, label)
    wf = WaveFunction(grid=grid, values=values, sample=sample, label=label)
    norm = wf.norm
    if abs(norm - 1.0) > NORM_TOL:
        if not renormalize:
            raise GridResolutionError(f"{label}: norm {norm:.9f} deviates from 1 by more than {NORM_TOL:.0e}")
        logger.warning(f"{label}: closed-form normalization off by {norm - 1.0:.3e}; renormalizing by quadrature")
        wf = WaveFunction(grid=grid, values=values / math.sqrt(norm), sample=sample, label=label)
    return wf


def _hermite_functions(u: np.ndarray, n_max: int) -> np.ndarray:
    """
    Normalized Hermite functions pi^(-1/4) H_n(u) e^(-u^2/2) / sqrt(2^n n!), n = 0..n_max.

    Three-term recurrence on the normalized functions, free of overflow.
    """
    out = np.empty((n_max + 1, len(u)), dtype=float)
    out[0] = PI_QUARTER * np.exp(-0.5 * u * u)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for k in range(1, n_max):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def number_basis(sample: TrajectorySample, grid: SpatialGrid, n_max: int) -> np.ndarray:
    """Rows Psi_n(x) for n = 0..n_max on `grid` (no adequacy checks)."""
    x = grid.points
    abs_eps = sample.abs_eps
    u = x / abs_eps
    # exp(i eps' x^2/(2 eps)) = chirp * exp(-u^2/2); the Gaussian part lives in the Hermite functions
    envelope = eps_power(sample, -0.5) * np.exp(_chirp_exponent(sample) * x * x + 0.5 * u * u)
    phases = np.exp(-1j * sample.phase * np.arange(n_max + 1))
    return phases[:, None] * envelope[None, :] * _hermite_functions(u, n_max)


# =====================================================================
# State constructors
# =====================================================================

def ground_state(sample: TrajectorySample, grid: Optional[SpatialGrid] = None) -> WaveFunction:
    """Psi_0(x, t) = pi^(-1/4) eps^(-1/2) exp(i eps' x^2 / (2 eps))."""
    grid = grid_for_state(sample) if grid is None else grid
    x = grid.points
    values = PI_QUARTER * eps_power(sample, -0.5) * np.exp(_chirp_exponent(sample) * x * x)
    return _finalize(values, grid, sample, "ground")


def _coherent_exponent(sample: TrajectorySample, alpha: complex, x: np.ndarray) -> np.ndarray:
    eps, eps_c = sample.eps, np.conj(sample.eps)
    return (
        _chirp_exponent(sample) * x * x
        - 0.5 * abs(alpha) ** 2
        - alpha ** 2 * eps_c / (2.0 * eps)
        + math.sqrt(2.0) * alpha * x / eps
    )


def _check_alpha(alpha: complex) -> complex:
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise InputError(f"alpha must be finite, got {alpha}")
    if abs(alpha) > MAX_ALPHA:
        raise InputError(f"|alpha| must be <= {MAX_ALPHA} (grid sizing bound), got {abs(alpha):.3f}")
    return alpha


def coherent_state(
    alpha: complex,
    sample: TrajectorySample,
    grid: Optional[SpatialGrid] = None,
) -> WaveFunction:
    """Correlated coherent state: eigenstate of A with eigenvalue alpha."""
    alpha = _check_alpha(alpha)
    grid = grid_for_state(sample, alpha=alpha, centered=True) if grid is None else grid
    values = PI_QUARTER * eps_power(sample, -0.5) * np.exp(_coherent_exponent(sample, alpha, grid.points))
    return _finalize(values, grid, sample, f"coherent alpha={alpha}")


def number_state(n: int, sample: TrajectorySample, grid: Optional[SpatialGrid] = None) -> WaveFunction:
    """Number state Psi_n: eigenstate of A+A with eigenvalue n."""
    if int(n) != n or n < 0:
        raise InputError(f"Number state index must be a non-negative integer, got {n}")
    n = int(n)
    if n > MAX_NUMBER:
        raise InputError(f"Number state index must be <= {MAX_NUMBER}, got {n}")
    grid = grid_for_state(sample, n_quanta=n) if grid is None else grid
    values = number_basis(sample, grid, n)[n]
    return _finalize(values, grid, sample, f"number n={n}")


def even_cat_norm(alpha: complex) -> float:
    """N_m = exp(|a|^2/2) / (2 sqrt(cosh |a|^2))."""
    a2 = abs(alpha) ** 2
    return math.exp(a2 / 2) / (2.0 * math.sqrt(math.cosh(a2)))


def odd_cat_norm(alpha: complex) -> float:
    """N_f = exp(|a|^2/2) / (2 sqrt(sinh |a|^2))."""
    a2 = abs(alpha) ** 2
    return math.exp(a2 / 2) / (2.0 * math.sqrt(math.sinh(a2)))


def cat_state(
    parity: str,
    alpha: complex,
    sample: TrajectorySample,
    grid: Optional[SpatialGrid] = None,
) -> WaveFunction:
    """
    Even (cosh) or odd (sinh) coherent state; eigenstate of A^2 with eigenvalue alpha^2.

    cosh/sinh are expanded into the two displaced exponentials so no
    factor can overflow on wide grids.
    """
    alpha = _check_alpha(alpha)
    if parity not in ("even", "odd"):
        raise InputError(f"Cat parity must be 'even' or 'odd', got '{parity}'")
    if parity == "odd" and abs(alpha) < MIN_ODD_ALPHA:
        raise InputError(f"Odd cat needs |alpha| >= {MIN_ODD_ALPHA} (N_f diverges), got {abs(alpha):.2e}")

    grid = grid_for_state(sample, alpha=alpha) if grid is None else grid
    x = grid.points
    norm = even_cat_norm(alpha) if parity == "even" else odd_cat_norm(alpha)
    sign = 1.0 if parity == "even" else -1.0
    # 2 N cosh(s) = N (e^s + e^-s)
    plus = np.exp(_coherent_exponent(sample, alpha, x))
    minus = np.exp(_coherent_exponent(sample, -alpha, x))
    values = norm * PI_QUARTER * eps_power(sample, -0.5) * (plus + sign * minus)
    symbol = "+" if parity == "even" else "-"
    return _finalize(values, grid, sample, f"cat{symbol} alpha={alpha}", renormalize=True)


def fock_synthesize(
    coeffs: FockVector,
    sample: TrajectorySample,
    grid: Optional[SpatialGrid] = None,
    label: str = "synthesized",
) -> WaveFunction:
    """Sum_n c_n Psi_n(x, t)."""
    coeffs.check()
    grid = grid_for_state(sample, n_quanta=coeffs.effective_n) if grid is None else grid
    basis = number_basis(sample, grid, coeffs.n_max)
    values = coeffs.coeffs @ basis
    return _finalize(values, grid, sample, label)


def fock_decompose(wf: WaveFunction, n_max: Optional[int] = None) -> FockVector:
    """c_n = <Psi_n(sample)|wf> by grid quadrature, n = 0..n_max."""
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    basis = number_basis(wf.sample, wf.grid, n_max)
    coeffs = np.array([
        integrate_grid(GridFunction(wf.grid, np.conj(row) * wf.values)) for row in basis
    ])
    return FockVector(coeffs)


# =====================================================================
# Analytic Fock expansions
# =====================================================================

def _glauber(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_coeffs(alpha: complex, n_max: Optional[int] = None) -> FockVector:
    """Glauber coefficients e^(-|a|^2/2) a^n / sqrt(n!)."""
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    return FockVector(_glauber(alpha, n_max)).check()


def cat_coeffs(parity: str, alpha: complex, n_max: Optional[int] = None) -> FockVector:
    """N (c_n(a) +- c_n(-a)): only even (or odd) n survive."""
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    if parity not in ("even", "odd"):
        raise InputError(f"Cat parity must be 'even' or 'odd', got '{parity}'")
    if parity == "odd" and abs(alpha) < MIN_ODD_ALPHA:
        raise InputError(f"Odd cat needs |alpha| >= {MIN_ODD_ALPHA}")
    n = np.arange(n_max + 1)
    keep = (n % 2 == 0) if parity == "even" else (n % 2 == 1)
    norm = even_cat_norm(alpha) if parity == "even" else odd_cat_norm(alpha)
    coeffs = np.where(keep, 2.0 * norm * _glauber(alpha, n_max), 0.0)
    return FockVector(coeffs).check()


# =====================================================================
# Moments
# =====================================================================

def _derivative(values: np.ndarray, grid: SpatialGrid, sample: TrajectorySample) -> np.ndarray:
    """
    d/dx of values sharing the chirp exp(i b x^2) of `sample`.

    Only the envelope is differenced; the chirp factor is differentiated
    exactly, so the stencil never sees the edge wavenumber 2 b x.
    """
    x = grid.points
    b = _chirp_exponent(sample).imag
    chirp = np.exp(1j * b * x * x)
    envelope = values * np.conj(chirp)
    return chirp * (_fd_derivative(envelope, grid.spacing, 1) + 2j * b * x * envelope)


def _p_moments(values: np.ndarray, grid: SpatialGrid, sample: TrajectorySample) -> Tuple[float, float, float]:
    """(<p>, <p^2>, Re<x p>) for unnormalized values."""
    dpsi = _derivative(values, grid, sample)
    x = grid.points
    conj = np.conj(values)
    mean_p = integrate_grid(GridFunction(grid, -1j * conj * dpsi)).real
    p2 = integrate_grid(GridFunction(grid, np.abs(dpsi) ** 2)).real
    xp = integrate_grid(GridFunction(grid, -1j * conj * x * dpsi)).real
    return mean_p, p2, xp


def moments(wf: WaveFunction) -> MomentSummary:
    """Grid moments of a wavefunction; p via 4th-order finite differences of the envelope."""
    grid = wf.grid
    x = grid.points
    density = np.abs(wf.values) ** 2
    norm = integrate_grid(GridFunction(grid, density)).real
    mean_x = integrate_grid(GridFunction(grid, x * density)).real / norm
    x2 = integrate_grid(GridFunction(grid, x * x * density)).real / norm

    fine = np.array(_p_moments(wf.values, grid, wf.sample)) / norm
    coarse_grid = grid.coarsened()
    coarse_values = wf.values[::2]
    coarse_norm = integrate_grid(GridFunction(coarse_grid, np.abs(coarse_values) ** 2)).real
    coarse = np.array(_p_moments(coarse_values, coarse_grid, wf.sample)) / coarse_norm
    noise = float(np.max(np.abs(fine - coarse)))
    if noise > DERIVATIVE_NOISE_TOL:
        raise GridResolutionError(
            f"{wf.label}: momentum moments change by {noise:.2e} under 2x refinement; grid too coarse"
        )

    mean_p, p2, xp = fine
    return MomentSummary.from_second_moments(
        mean_x=mean_x,
        mean_p=mean_p,
        sigma_x=x2 - mean_x ** 2,
        sigma_p=p2 - mean_p ** 2,
        sigma_xp=xp - mean_x * mean_p,
    )


def analytic_moments(sample: TrajectorySample, alpha: complex = 0j) -> MomentSummary:
    """
    Closed-form moments of the ground (or coherent) state.

    sigma_x = |eps|^2/2, sigma_p = |eps'|^2/2, sigma_xp = Re(eps* eps')/2;
    the means of a coherent state are sqrt(2) Re(eps* a), sqrt(2) Re(eps'* a).
    """
    eps, deps = sample.eps, sample.deps
    alpha = complex(alpha)
    return MomentSummary.from_second_moments(
        mean_x=math.sqrt(2.0) * (np.conj(eps) * alpha).real,
        mean_p=math.sqrt(2.0) * (np.conj(deps) * alpha).real,
        sigma_x=abs(eps) ** 2 / 2,
        sigma_p=abs(deps) ** 2 / 2,
        sigma_xp=(np.conj(eps) * deps).real / 2,
    )


def squeezing_series(traj: EpsilonTrajectory) -> SqueezingSeries:
    """
    sigma_x, sigma_p, corr along a trajectory; squeezed where sigma_x < 1/2.

    The minimum of sigma_x is refined between the neighbours of the
    smallest sample on the dense output.
    """
    eps, deps = traj.eps, traj.deps
    sigma_x = np.abs(eps) ** 2 / 2
    sigma_p = np.abs(deps) ** 2 / 2
    sigma_xp = (np.conj(eps) * deps).real / 2
    corr = sigma_xp / np.sqrt(sigma_x * sigma_p)

    i_min = int(np.argmin(sigma_x))
    t_min, min_sigma_x = float(traj.times[i_min]), float(sigma_x[i_min])
    if len(traj) >= 3:
        lo = float(traj.times[max(i_min - 1, 0)])
        hi = float(traj.times[min(i_min + 1, len(traj) - 1)])
        res = minimize_scalar(
            lambda t: traj.sample_at(t).abs_eps ** 2 / 2,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if res.success and res.fun < min_sigma_x:
            t_min, min_sigma_x = float(res.x), float(res.fun)

    logger.debug(f"squeezing_series: min sigma_x={min_sigma_x:.12f} at t={t_min:.6f}")
    return SqueezingSeries(
        times=traj.times,
        sigma_x=sigma_x,
        sigma_p=sigma_p,
        corr=corr,
        squeezed=sigma_x < 0.5 - SQUEEZING_MARGIN,
        t_min=t_min,
        min_sigma_x=min_sigma_x,
    )


# =====================================================================
# Integral of motion
# =====================================================================

def _apply_a_values(values: np.ndarray, grid: SpatialGrid, sample: TrajectorySample) -> np.ndarray:
    # (i/sqrt2)(eps (-i d/dx) - eps' x) = (eps d/dx - i eps' x) / sqrt2
    dpsi = _derivative(values, grid, sample)
    return (sample.eps * dpsi - 1j * sample.deps * grid.points * values) / math.sqrt(2.0)


def apply_A(wf: WaveFunction, check: bool = True) -> GridFunction:
    """A Psi on the grid; the derivative is cross-checked at step 2h when `check`."""
    out = _apply_a_values(wf.values, wf.grid, wf.sample)
    if check:
        coarse = _apply_a_values(wf.values[::2], wf.grid.coarsened(), wf.sample)
        noise = float(np.max(np.abs(out[::2] - coarse)[2:-2]))
        scale = max(1.0, float(np.max(np.abs(out))))
        if noise > DERIVATIVE_NOISE_TOL * scale:
            raise GridResolutionError(
                f"{wf.label}: A Psi changes by {noise:.2e} under 2x refinement; grid too coarse"
            )
    return GridFunction(wf.grid, out)


def eigen_residual(wf: WaveFunction, eigenvalue: complex, power: int = 1) -> float:
    """||A^power Psi - eigenvalue Psi||."""
    if power not in (1, 2):
        raise InputError(f"power must be 1 or 2, got {power}")
    values = apply_A(wf).values
    if power == 2:
        values = _apply_a_values(values, wf.grid, wf.sample)
    return l2_norm(GridFunction(wf.grid, values - eigenvalue * wf.values))


def number_expectation(wf: WaveFunction) -> float:
    """<A+A> = ||A Psi||^2."""
    return l2_norm(apply_A(wf)) ** 2


def overlap(bra: WaveFunction, ket: WaveFunction) -> complex:
    """<bra|ket> on a shared grid."""
    return inner_product(bra, ket)


def orthonormality_defect(sample: TrajectorySample, n_max: int, grid: Optional[SpatialGrid] = None) -> float:
    """max_{m,n <= n_max} |<Psi_m|Psi_n> - delta_mn|."""
    grid = grid_for_state(sample, n_quanta=n_max) if grid is None else grid
    states: List[WaveFunction] = [number_state(n, sample, grid) for n in range(n_max + 1)]
    worst = 0.0
    for m, bra in enumerate(states):
        for n in range(m, n_max + 1):
            target = 1.0 if m == n else 0.0
            worst = max(worst, abs(inner_product(bra, states[n]) - target))
    return worst
