"""
ParamLab Multivariable Hermite — H_n^{R} polynomials and closed-form Gaussian overlaps.

Convention (generating function):

    exp(-1/2 a R a + a R x) = sum_n H_n^{R}(x) prod_i a_i^n_i / n_i!

so that N=1, R=2 gives the physicists' Hermite polynomials. The overlap

    I = integral H_n^{R}(x) H_m^{r}(Lambda x + d) exp(-x M x + c x) dx

closes into prefactor * H_(n,m)^{rho}(y) with a 2N x 2N kernel rho.
Two linear-term conventions are kept:
  - "resolved": derived from the generating function (default)
  - "printed":  the literal textbook blocks, kept for comparison
Both share the same rho; they differ only when R and M do not commute
or d != 0. The direct quadrature oracle decides between them.
"""

import cmath
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve

from config import get_settings
from oscillator.numerics import (
    InputError,
    NumericalError,
    SpatialGrid,
    gaussian_box,
    inner_product,
    quad_nd,
)
from oscillator.states import grid_for_state, number_state
from oscillator.trajectory import TrajectorySample


# =====================================================================
# Exceptions
# =====================================================================

class HermiteBudgetError(InputError):
    """Multi-index total order above the evaluation budget."""
    pass


class KernelError(NumericalError):
    """The rho kernel could not be assembled (asymmetric or singular)."""
    pass


class ReductionUnavailableError(NumericalError):
    """The closed-form Franck-Condon reduction does not apply at this sample."""
    pass


# =====================================================================
# Constants
# =====================================================================

MAX_ORDER = 16
MAX_ORACLE_ORDER = 8
MAX_FC_INDEX = 10
FC_AGREEMENT_TOL = 1e-6
SYMMETRY_TOL = 1e-12
RHO_SYMMETRY_TOL = 1e-10
CONVENTIONS = ("resolved", "printed")
BLOCK_ORDERS = ("nm", "mn")


# =====================================================================
# Data classes
# =====================================================================

@dataclass(frozen=True)
class MultiIndex:
    """Non-negative integer multi-index (n_1, ..., n_N)."""
    entries: Tuple[int, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if len(entries) < 1:
            raise InputError("MultiIndex needs at least one entry")
        if any(int(e) != e or e < 0 for e in entries):
            raise InputError(f"MultiIndex entries must be non-negative integers, got {entries}")
        object.__setattr__(self, "entries", tuple(int(e) for e in entries))

    @classmethod
    def of(cls, value: Union["MultiIndex", int, Sequence[int]]) -> "MultiIndex":
        if isinstance(value, MultiIndex):
            return value
        if isinstance(value, (int, np.integer)):
            return cls((int(value),))
        return cls(tuple(value))

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> int:
        return sum(self.entries)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        """Concatenation (n, m) -> 2N-index."""
        return MultiIndex(self.entries + other.entries)


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Real symmetric matrix."""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.atleast_2d(np.array(self.entries, dtype=float))
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InputError(f"SymmetricMatrix must be square, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InputError("SymmetricMatrix entries must be finite")
        asym = float(np.max(np.abs(entries - entries.T)))
        if asym > SYMMETRY_TOL:
            raise InputError(f"Matrix is not symmetric (defect {asym:.2e})")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, value) -> "SymmetricMatrix":
        return value if isinstance(value, SymmetricMatrix) else cls(value)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class OverlapSpec:
    """Parameters of the Gaussian overlap integral."""
    R_her: SymmetricMatrix
    r_her: SymmetricMatrix
    Lambda: np.ndarray
    M_quad: SymmetricMatrix
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name in ("R_her", "r_her", "M_quad"):
            object.__setattr__(self, name, SymmetricMatrix.of(getattr(self, name)))
        n = self.R_her.dim
        lam = np.atleast_2d(np.array(self.Lambda, dtype=float))
        c = np.atleast_1d(np.array(self.c, dtype=float))
        d = np.atleast_1d(np.array(self.d, dtype=float))
        if self.r_her.dim != n or self.M_quad.dim != n or lam.shape != (n, n):
            raise InputError(f"OverlapSpec blocks must all be {n}x{n}")
        if c.shape != (n,) or d.shape != (n,):
            raise InputError(f"OverlapSpec vectors c, d must have length {n}")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise InputError("OverlapSpec entries must be finite")
        try:
            cho_factor(self.M_quad.entries)
        except LinAlgError:
            raise InputError("M_quad must be positive definite for the overlap integral to converge")
        for arr in (lam, c, d):
            arr.flags.writeable = False
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def dim(self) -> int:
        return self.R_her.dim

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OverlapSpec":
        """Matrices row-major as nested lists, vectors as lists."""
        return cls(
            R_her=SymmetricMatrix(data["R_her"]),
            r_her=SymmetricMatrix(data["r_her"]),
            Lambda=np.array(data["Lambda"], dtype=float),
            M_quad=SymmetricMatrix(data["M_quad"]),
            c=np.array(data["c"], dtype=float),
            d=np.array(data["d"], dtype=float),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "R_her": self.R_her.entries.tolist(),
            "r_her": self.r_her.entries.tolist(),
            "Lambda": self.Lambda.tolist(),
            "M_quad": self.M_quad.entries.tolist(),
            "c": self.c.tolist(),
            "d": self.d.tolist(),
        }


@dataclass(frozen=True, eq=False)
class RhoKernel:
    """Closed-form overlap kernel: I = prefactor * H^{rho}_(n,m)(y)."""
    rho: np.ndarray
    linear: np.ndarray          # (y1; y2) = rho y
    y: Optional[np.ndarray]     # None when rho is singular
    prefactor: float
    convention: str
    asymmetry: float            # |rho - rho^T| before symmetrization
    condition: float

    @property
    def dim(self) -> int:
        return self.rho.shape[0] // 2


@dataclass(frozen=True)
class FranckCondonAmplitude:
    """<Psi_n(t=0)|Psi_m(sample)> by grid quadrature and by the kernel reduction."""
    n: int
    m: int
    value: complex                 # grid quadrature, ground truth
    reduced: Optional[complex]     # kernel reduction, None when unavailable

    @property
    def disagreement(self) -> Optional[float]:
        return None if self.reduced is None else abs(self.value - self.reduced)

    @property
    def probability(self) -> float:
        return abs(self.value) ** 2


# =====================================================================
# Hermite lattice
# =====================================================================

def _hermite_table(matrix: np.ndarray, linear: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """
    H_k for every k <= order (entrywise), generating function exp(-1/2 a B a + a.linear).

    H_(k+e_i) = linear_i H_k - sum_j B_ij k_j H_(k-e_j), filled in C order.
    """
    shape = tuple(int(o) + 1 for o in order)
    dtype = np.result_type(matrix, linear, float)
    table = np.zeros(shape, dtype=dtype)
    table[(0,) * len(shape)] = 1.0
    for k in np.ndindex(*shape):
        if not any(k):
            continue
        i = next(axis for axis, e in enumerate(k) if e)
        km = list(k)
        km[i] -= 1
        value = linear[i] * table[tuple(km)]
        for j, kj in enumerate(km):
            if kj:
                lower = list(km)
                lower[j] -= 1
                value -= matrix[i, j] * kj * table[tuple(lower)]
        table[k] = value
    return table


def _check_budget(index: MultiIndex, budget: int = MAX_ORDER) -> None:
    if index.total > budget:
        raise HermiteBudgetError(f"Total order |n| = {index.total} exceeds the budget {budget}")


def mv_hermite(R_her, n, x) -> float:
    """H_n^{R}(x) by the lattice recurrence; H_0 = 1."""
    R = SymmetricMatrix.of(R_her).entries
    index = MultiIndex.of(n)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if index.dim != R.shape[0] or x.shape != (index.dim,):
        raise InputError(f"Dimension mismatch: R is {R.shape}, n has {index.dim} entries, x has {x.shape}")
    _check_budget(index)
    return float(_hermite_table(R, R @ x, index.entries)[index.entries])


# =====================================================================
# Kernel assembly
# =====================================================================

def assemble_kernel(spec: OverlapSpec, convention: str = "resolved") -> RhoKernel:
    """
    Blocks R1 = R - 1/2 R M^-1 R, R2 = r - 1/2 r L M^-1 L^T r, R12 = -1/2 R M^-1 L^T r.

    Linear term (y1; y2):
      resolved  y1 = 1/2 R M^-1 c,                  y2 = r d + 1/2 r L M^-1 c
      printed   y1 = 1/4 (R M^-1 + M^-1 R) c,       y2 = 1/4 (r L M^-1 + M^-1 L^T r) c + d
    """
    if convention not in CONVENTIONS:
        raise InputError(f"convention must be one of {CONVENTIONS}, got '{convention}'")

    R, r, lam = spec.R_her.entries, spec.r_her.entries, spec.Lambda
    c, d = spec.c, spec.d
    factor = cho_factor(spec.M_quad.entries)
    minv = lambda b: cho_solve(factor, b)

    minv_R = minv(R)
    minv_lt_r = minv(lam.T @ r)
    minv_c = minv(c)

    r1 = R - 0.5 * R @ minv_R
    r2 = r - 0.5 * r @ lam @ minv_lt_r
    r12 = -0.5 * R @ minv_lt_r
    rho = np.block([[r1, r12], [r12.T, r2]])

    asymmetry = float(np.max(np.abs(rho - rho.T)))
    if asymmetry > RHO_SYMMETRY_TOL * max(1.0, float(np.max(np.abs(rho)))):
        raise KernelError(f"rho asymmetry {asymmetry:.2e} exceeds {RHO_SYMMETRY_TOL:.0e}: formula inconsistency")
    rho = 0.5 * (rho + rho.T)

    if convention == "resolved":
        y1 = 0.5 * R @ minv_c
        y2 = r @ d + 0.5 * r @ lam @ minv_c
    else:
        y1 = 0.25 * (R @ minv_c + minv(R @ c))
        y2 = 0.25 * (r @ lam @ minv_c + minv(lam.T @ r @ c)) + d
    linear = np.concatenate([y1, y2])

    try:
        y = solve(rho, linear, assume_a="sym")
    except (LinAlgError, ValueError):
        logger.warning(f"assemble_kernel: rho is singular, y left unresolved (linear term {linear})")
        y = None

    log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    prefactor = math.pi ** (spec.dim / 2) * math.exp(-0.5 * log_det + 0.25 * float(c @ minv_c))
    return RhoKernel(
        rho=rho,
        linear=linear,
        y=y,
        prefactor=prefactor,
        convention=convention,
        asymmetry=asymmetry,
        condition=float(np.linalg.cond(rho)),
    )


def _block_index(n: MultiIndex, m: MultiIndex, order: str) -> MultiIndex:
    if order not in BLOCK_ORDERS:
        raise InputError(f"block order must be one of {BLOCK_ORDERS}, got '{order}'")
    return n + m if order == "nm" else m + n


def gaussian_overlap(
    spec: OverlapSpec,
    n,
    m,
    convention: str = "resolved",
    order: str = "nm",
) -> float:
    """Closed form prefactor * H_(n,m)^{rho}(y)."""
    n, m = MultiIndex.of(n), MultiIndex.of(m)
    if n.dim != spec.dim or m.dim != spec.dim:
        raise InputError(f"Multi-indices must have {spec.dim} entries")
    index = _block_index(n, m, order)
    _check_budget(index)
    kernel = assemble_kernel(spec, convention)
    table = _hermite_table(kernel.rho, kernel.linear, index.entries)
    return float(kernel.prefactor * table[index.entries])


def overlap_oracle(spec: OverlapSpec, n, m, tol: Optional[float] = None) -> float:
    """Direct adaptive quadrature of H_n^{R}(x) H_m^{r}(L x + d) exp(-x M x + c x)."""
    n, m = MultiIndex.of(n), MultiIndex.of(m)
    if spec.dim > 2:
        raise InputError(f"overlap_oracle supports N <= 2, got N={spec.dim}")
    if n.dim != spec.dim or m.dim != spec.dim:
        raise InputError(f"Multi-indices must have {spec.dim} entries")
    degree = n.total + m.total
    if degree > MAX_ORACLE_ORDER:
        raise HermiteBudgetError(f"|n| + |m| = {degree} exceeds the oracle budget {MAX_ORACLE_ORDER}")

    R, r, lam = spec.R_her.entries, spec.r_her.entries, spec.Lambda
    M, c, d = spec.M_quad.entries, spec.c, spec.d

    def integrand(*xs: float) -> float:
        x = np.array(xs)
        u = lam @ x + d
        h_n = _hermite_table(R, R @ x, n.entries)[n.entries]
        h_m = _hermite_table(r, r @ u, m.entries)[m.entries]
        return float(h_n * h_m * math.exp(-x @ M @ x + c @ x))

    center = 0.5 * np.linalg.solve(M, c)
    sigmas = get_settings().quad_box_sigmas + 1.5 * math.sqrt(degree)
    box = gaussian_box(center, M, sigmas)
    result = quad_nd(integrand, spec.dim, box, tol=tol, rel_tol=1e-11)
    return result.value.real


def formula_discrepancy(spec: OverlapSpec, n, m, order: str = "nm", tol: float = 1e-6) -> Dict[str, Any]:
    """Printed and resolved conventions side by side against the oracle."""
    printed = gaussian_overlap(spec, n, m, "printed", order)
    resolved = gaussian_overlap(spec, n, m, "resolved", order)
    oracle = overlap_oracle(spec, n, m)
    scale = max(abs(oracle), 1.0)
    report = {
        "printed": printed,
        "resolved": resolved,
        "oracle": oracle,
        "printed_rel_err": abs(printed - oracle) / scale,
        "resolved_rel_err": abs(resolved - oracle) / scale,
    }
    if report["printed_rel_err"] > tol:
        logger.warning(
            f"Printed overlap convention deviates from quadrature: "
            f"printed={printed:.12g}, oracle={oracle:.12g}, rel_err={report['printed_rel_err']:.2e}"
        )
    return report


# =====================================================================
# Franck-Condon amplitudes
# =====================================================================

def _shared_grid(sample: TrajectorySample, n: int, m: int) -> SpatialGrid:
    """A grid adequate for both Psi_n(t=0) and Psi_m(sample)."""
    first = grid_for_state(TrajectorySample.initial(), n_quanta=n)
    second = grid_for_state(sample, n_quanta=m)
    half = max(first.x_max, second.x_max)
    step = min(first.spacing, second.spacing)
    n_points = min(int(math.ceil(2 * half / step)) + 1, get_settings().grid_max_points)
    if n_points % 2 == 0:
        n_points += 1
    return SpatialGrid.centered(0.0, half, n_points)


def reduced_amplitude(n: int, m: int, sample: TrajectorySample) -> complex:
    """
    Kernel reduction with N=1, R = r = 2, Lambda = 1/|eps|, c = d = 0 and
    the complex Gaussian weight M = 1/2 - i eps'/(2 eps):

        amplitude = eps^(-1/2) e^(-i m theta) (2^(n+m) n! m!)^(-1/2) M^(-1/2) H^{rho}_(n,m)(0)

    The kernel arithmetic runs on complex entries; M keeps Re M > 0 on
    the Wronskian shell, where the principal square root is continuous.
    """
    eps, deps, theta = sample.eps, sample.deps, sample.phase
    weight = 0.5 - 0.5j * deps / eps
    if not (weight.real > 0 and cmath.isfinite(weight)):
        raise ReductionUnavailableError(f"Gaussian weight M = {weight} has no positive real part")

    inv_abs = 1.0 / abs(eps)
    rho = np.array([
        [2.0 - 2.0 / weight, -2.0 * inv_abs / weight],
        [-2.0 * inv_abs / weight, 2.0 - 2.0 * inv_abs ** 2 / weight],
    ])
    h = _hermite_table(rho, np.zeros(2, dtype=complex), (n, m))[n, m]

    eps_pow = abs(eps) ** -0.5 * cmath.exp(-0.5j * theta)
    norm = math.exp(-0.5 * ((n + m) * math.log(2.0) + math.lgamma(n + 1) + math.lgamma(m + 1)))
    return complex(eps_pow * cmath.exp(-1j * m * theta) * norm * h / cmath.sqrt(weight))


def franck_condon(
    n: int,
    m: int,
    sample: TrajectorySample,
    grid: Optional[SpatialGrid] = None,
) -> FranckCondonAmplitude:
    """<Psi_n(t=0)|Psi_m(sample)>, grid path and kernel path."""
    for name, value in (("n", n), ("m", m)):
        if int(value) != value or not 0 <= value <= MAX_FC_INDEX:
            raise InputError(f"Franck-Condon index {name} must be an integer in [0, {MAX_FC_INDEX}], got {value}")
    n, m = int(n), int(m)
    grid = _shared_grid(sample, n, m) if grid is None else grid

    bra = number_state(n, TrajectorySample.initial(), grid)
    ket = number_state(m, sample, grid)
    value = inner_product(bra, ket)

    try:
        reduced = reduced_amplitude(n, m, sample)
    except ReductionUnavailableError as e:
        logger.warning(f"franck_condon({n}, {m}) at t={sample.t}: {e}")
        reduced = None
    return FranckCondonAmplitude(n=n, m=m, value=value, reduced=reduced)


def franck_condon_amplitude(
    n: int,
    m: int,
    sample: TrajectorySample,
    grid: Optional[SpatialGrid] = None,
) -> complex:
    """The grid-quadrature amplitude alone; the kernel path still runs as a cross-check."""
    amp = franck_condon(n, m, sample, grid)
    if amp.disagreement is not None and amp.disagreement > FC_AGREEMENT_TOL:
        logger.warning(
            f"franck_condon({n}, {m}) at t={sample.t}: grid and kernel paths differ by {amp.disagreement:.2e}"
        )
    return amp.value


def franck_condon_matrix(n_max: int, sample: TrajectorySample) -> List[List[FranckCondonAmplitude]]:
    """All amplitudes for n, m <= n_max on one shared grid."""
    grid = _shared_grid(sample, n_max, n_max)
    return [[franck_condon(n, m, sample, grid) for m in range(n_max + 1)] for n in range(n_max + 1)]
