"""
ParamLab q-Deformation — q-brackets, truncated ladder matrices and q-coherent states.

    [n]   = sinh(lam n) / sinh(lam),    q = e^lam >= 1
    [n!]  = [n][n-1]...[1],             [0!] = 1
    A_q   = A sqrt(sinh(lam N) / (N sinh lam))   ->   A_q Psi_n = sqrt([n]) Psi_(n-1)

The deformed commutator A_q A_q+ - q A_q+ A_q = q^-N reduces on the
number basis to the scalar identity [n+1] - q[n] = q^-n, which is exact;
residuals measured here are floating-point noise only.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.special import logsumexp

from config import get_settings
from oscillator.numerics import InputError, NumericalError
from oscillator.states import FockVector, TruncationError


# =====================================================================
# Exceptions
# =====================================================================

class QOverflowError(NumericalError):
    """A q-bracket or q-factorial is not representable in double precision."""
    pass


# =====================================================================
# Constants
# =====================================================================

MAX_LAMBDA = 5.0
MAX_SINH_ARGUMENT = 700.0
SERIES_LAMBDA = 1e-6        # below this, [n] uses its small-lambda series
MIN_N_MAX = 8
MAX_N_MAX = 512
QCOHERENT_TAIL_TOL = 1e-12


# =====================================================================
# Data classes
# =====================================================================

@dataclass(frozen=True)
class QParam:
    """Deformation parameter lam = ln q (real, 0 <= lam <= 5)."""
    lam: float

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise InputError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.lam > MAX_LAMBDA:
            raise InputError(f"lambda must be <= {MAX_LAMBDA} ([n!] overflows beyond), got {self.lam}")

    @classmethod
    def from_q(cls, q: float) -> "QParam":
        if q < 1:
            raise InputError(f"q must be >= 1 (q and 1/q give the same brackets), got {q}")
        return cls(math.log(q))

    @property
    def q(self) -> float:
        return math.exp(self.lam)

    @property
    def undeformed(self) -> bool:
        return self.lam == 0.0


@dataclass(frozen=True, eq=False)
class LadderMatrices:
    """Truncated Fock-space matrices on n = 0..n_max."""
    n_max: int
    q: QParam
    a: np.ndarray          # a[n-1, n] = sqrt(n)
    a_dag: np.ndarray
    num: np.ndarray        # diag(0, 1, ..., n_max)
    a_q: np.ndarray        # a_q[n-1, n] = sqrt([n])
    brackets: np.ndarray   # [n] for n = 0..n_max

    @property
    def a_q_dag(self) -> np.ndarray:
        return self.a_q.conj().T


# =====================================================================
# Brackets and factorials
# =====================================================================

def _as_qparam(q) -> QParam:
    return q if isinstance(q, QParam) else QParam(float(q))


def _sinh_ratio(n: int, lam: float) -> float:
    """sinh(lam n)/sinh(lam) for any real lam, cancellation-safe near 0."""
    if lam == 0.0:
        return float(n)
    if abs(lam) < SERIES_LAMBDA:
        return n + lam * lam * n * (n * n - 1) / 6.0
    return math.sinh(lam * n) / math.sinh(lam)


def qbracket(n: int, q) -> float:
    """[n] = sinh(lam n)/sinh(lam); exactly n at lam = 0."""
    q = _as_qparam(q)
    if n < 0 or int(n) != n:
        raise InputError(f"qbracket needs an integer n >= 0, got {n}")
    if q.lam * n > MAX_SINH_ARGUMENT:
        raise QOverflowError(f"lam*n = {q.lam * n:.1f} exceeds the overflow guard {MAX_SINH_ARGUMENT}")
    return _sinh_ratio(int(n), q.lam)


def _log_bracket(k: int, lam: float) -> float:
    if lam < SERIES_LAMBDA:
        return math.log(_sinh_ratio(k, lam))
    # sinh(lam k)/sinh(lam) = e^(lam(k-1)) (1 - e^(-2 lam k)) / (1 - e^(-2 lam))
    return lam * (k - 1) + math.log1p(-math.exp(-2 * lam * k)) - math.log1p(-math.exp(-2 * lam))


def log_qfactorial(n: int, q) -> float:
    """log [n!], free of overflow for any n."""
    q = _as_qparam(q)
    if n < 0 or int(n) != n:
        raise InputError(f"log_qfactorial needs an integer n >= 0, got {n}")
    return math.fsum(_log_bracket(k, q.lam) for k in range(1, int(n) + 1))


def qfactorial(n: int, q) -> float:
    """[n!] = [n][n-1]...[1]; [0!] = 1."""
    q = _as_qparam(q)
    log_value = log_qfactorial(n, q)
    if log_value > math.log(np.finfo(float).max):
        raise QOverflowError(f"[{n}!] at lambda={q.lam} overflows double precision (log = {log_value:.1f})")
    result = 1.0
    for k in range(1, int(n) + 1):
        result *= _sinh_ratio(k, q.lam)
    return result


def bracket_identity_residual(n_max: int, q) -> float:
    """max_n |[n+1] - q[n] - q^-n| / max(1, [n+1]) for n < n_max."""
    q = _as_qparam(q)
    worst = 0.0
    for n in range(int(n_max)):
        upper = qbracket(n + 1, q)
        defect = upper - q.q * qbracket(n, q) - math.exp(-q.lam * n)
        worst = max(worst, abs(defect) / max(1.0, upper))
    return worst


# =====================================================================
# Ladder matrices
# =====================================================================

def ladder_matrices(n_max: int, q) -> LadderMatrices:
    """a, a+, N and the deformed a_q on the truncated number basis."""
    q = _as_qparam(q)
    if int(n_max) != n_max or not MIN_N_MAX <= n_max <= MAX_N_MAX:
        raise InputError(f"n_max must be an integer in [{MIN_N_MAX}, {MAX_N_MAX}], got {n_max}")
    n_max = int(n_max)

    n = np.arange(n_max + 1)
    brackets = np.array([qbracket(k, q) for k in n])
    a = np.diag(np.sqrt(n[1:]).astype(complex), k=1)
    # sqrt(sinh(lam N)/(N sinh lam)); the N=0 entry takes its limit value 1
    ratio = np.ones(n_max + 1)
    ratio[1:] = brackets[1:] / n[1:]
    a_q = a @ np.diag(np.sqrt(ratio))

    logger.debug(f"ladder_matrices: n_max={n_max}, lambda={q.lam}, [n_max]={brackets[-1]:.6e}")
    return LadderMatrices(
        n_max=n_max,
        q=q,
        a=a,
        a_dag=a.conj().T,
        num=np.diag(n.astype(complex)),
        a_q=a_q,
        brackets=brackets,
    )


def commutator_defect(m: LadderMatrices) -> Tuple[float, float]:
    """
    ([A, A+] - I) split into (interior max-norm, boundary entry).

    The interior covers indices 0..n_max-1 and is exactly zero; the
    truncation leaves -(n_max + 1) at the last diagonal entry.
    """
    defect = m.a @ m.a_dag - m.a_dag @ m.a - np.eye(m.n_max + 1)
    interior = float(np.max(np.abs(defect[: m.n_max, : m.n_max])))
    return interior, float(defect[m.n_max, m.n_max].real)


def qcommutator_residual(m: LadderMatrices, q=None) -> float:
    """
    max_ij |D_ij| / max(1, S_ij) over indices 0..n_max-1, where
    D = A_q A_q+ - q A_q+ A_q - q^-N and S sums the magnitudes of its terms.
    """
    q = m.q if q is None else _as_qparam(q)
    first = m.a_q @ m.a_q_dag
    second = q.q * (m.a_q_dag @ m.a_q)
    third = np.diag(np.exp(-q.lam * np.arange(m.n_max + 1)))
    k = m.n_max
    defect = (first - second - third)[:k, :k]
    scale = (np.abs(first) + np.abs(second) + np.abs(third))[:k, :k]
    return float(np.max(np.abs(defect) / np.maximum(1.0, scale)))


# =====================================================================
# q-coherent states
# =====================================================================

def _log_weights(alpha: complex, q: QParam, n_max: int) -> np.ndarray:
    """log(|alpha|^(2n) / [n!]) for n = 0..n_max."""
    log_fact = np.cumsum([0.0] + [_log_bracket(k, q.lam) for k in range(1, n_max + 1)])
    return 2 * np.arange(n_max + 1) * math.log(abs(alpha)) - log_fact


def qcoherent_norm(alpha: complex, q, n_max: Optional[int] = None) -> float:
    """N_q = (sum_n |alpha|^(2n) / [n!])^(-1/2)."""
    q = _as_qparam(q)
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    if complex(alpha) == 0:
        return 1.0
    return math.exp(-0.5 * logsumexp(_log_weights(complex(alpha), q, n_max)))


def qcoherent_coeffs(alpha: complex, q, n_max: Optional[int] = None) -> FockVector:
    """c_n = N_q alpha^n / sqrt([n!]), eigenvector of A_q with eigenvalue alpha."""
    q = _as_qparam(q)
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    alpha = complex(alpha)
    if n_max < MIN_N_MAX:
        raise InputError(f"n_max must be >= {MIN_N_MAX}, got {n_max}")
    if alpha == 0:
        coeffs = np.zeros(n_max + 1, dtype=complex)
        coeffs[0] = 1.0
        return FockVector(coeffs)

    log_weights = _log_weights(alpha, q, n_max)
    log_tail = 0.5 * log_weights[-1]
    if log_tail >= math.log(QCOHERENT_TAIL_TOL):
        raise TruncationError(
            f"q-coherent tail |alpha|^n_max/sqrt([n_max!]) = {math.exp(log_tail):.2e} "
            f">= {QCOHERENT_TAIL_TOL:.0e}; raise n_max above {n_max}"
        )
    log_norm = -0.5 * logsumexp(log_weights)
    n = np.arange(n_max + 1)
    coeffs = np.exp(log_norm + 0.5 * log_weights) * np.exp(1j * n * np.angle(alpha))
    return FockVector(coeffs).check()


def apply_aq(m: LadderMatrices, coeffs: FockVector) -> np.ndarray:
    """A_q in coefficient space: (A_q c)_n = sqrt([n+1]) c_(n+1)."""
    if coeffs.n_max != m.n_max:
        raise InputError(f"Fock vector n_max={coeffs.n_max} does not match matrices n_max={m.n_max}")
    return m.a_q @ coeffs.coeffs


def qcoherent_residual(m: LadderMatrices, coeffs: FockVector, alpha: complex) -> float:
    """max_(n < n_max) |sqrt([n+1]) c_(n+1) - alpha c_n|."""
    residual = apply_aq(m, coeffs) - complex(alpha) * coeffs.coeffs
    return float(np.max(np.abs(residual[: m.n_max])))


# =====================================================================
# Report
# =====================================================================

def qreport(q, n_max: Optional[int] = None, alpha: Optional[complex] = None) -> Dict[str, Any]:
    """Spectra and residuals of the deformed algebra, ready for JSON export."""
    q = _as_qparam(q)
    n_max = get_settings().fock_n_max if n_max is None else int(n_max)
    m = ladder_matrices(n_max, q)
    interior, boundary = commutator_defect(m)
    spectrum = np.real(np.diag(m.a_q_dag @ m.a_q))

    report: Dict[str, Any] = {
        "lambda": q.lam,
        "q": q.q,
        "n_max": n_max,
        "brackets": [float(b) for b in m.brackets],
        "aq_dag_aq_spectrum": [float(v) for v in spectrum],
        "commutator_interior_defect": interior,
        "commutator_boundary_defect": boundary,
        "qcommutator_residual": qcommutator_residual(m),
        "bracket_identity_residual": bracket_identity_residual(n_max, q),
    }
    if alpha is not None:
        coeffs = qcoherent_coeffs(alpha, q, n_max)
        report["qcoherent"] = {
            "alpha": [complex(alpha).real, complex(alpha).imag],
            "norm_constant": qcoherent_norm(alpha, q, n_max),
            "eigen_residual": qcoherent_residual(m, coeffs, alpha),
            "mean_number": coeffs.mean_number,
        }

    logger.info(
        f"qreport: lambda={q.lam:.6g}, n_max={n_max}, "
        f"residual={report['qcommutator_residual']:.2e}, interior defect={interior:.1e}"
    )
    return report
