"""
ParamLab Trajectory — the classical mode function epsilon(t).

Every exact quantum state of the parametric oscillator is built from the
complex solution of

    eps''(t) + omega^2(t) eps(t) = 0,      eps(0) = 1,  eps'(0) = i

The initial data force the Wronskian eps' eps* - eps'* eps = 2i for all t,
which is the classical face of [A, A+] = 1. This module integrates the
mode equation for a handful of frequency profiles, certifies the
Wronskian, and carries the continuous phase theta(t) of eps:

    theta' = Im(eps' eps*) / |eps|^2 = 1 / |eps|^2 > 0,   theta(0) = 0

theta is integrated together with (eps, eps') so fractional powers of
eps downstream never jump across the branch cut, whatever dt_out is.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import OdeSolution, solve_ivp
from scipy.interpolate import CubicSpline

from config import get_settings
from oscillator.numerics import InputError, NonFiniteError, NumericalError


# =====================================================================
# Exceptions
# =====================================================================

class ProfileError(InputError):
    """Invalid frequency profile parameters."""
    pass


class ProfileRangeError(ProfileError):
    """A tabulated profile was queried outside its time range."""
    pass


class IntegrationError(NumericalError):
    """The mode-equation integrator failed."""
    pass


# =====================================================================
# Constants
# =====================================================================

PROFILE_KINDS = ("constant", "free", "step", "modulated", "tabulated")
ANALYTIC_KINDS = ("constant", "free", "step")

MIN_SOLVER_TOL = 1e-13
MAX_SOLVER_TOL = 1e-6

UNIT_FREQUENCY_TOL = 1e-12
WRONSKIAN = 2j

# integrator runs tighter than the requested tol; the Wronskian drift
# accumulates over many periods
RTOL_FACTOR = 1e-2
ATOL_FACTOR = 1e-3
MIN_RTOL = 1e-13


# =====================================================================
# Frequency profiles
# =====================================================================

@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    """
    omega^2(t) for t >= 0.

    Use the named constructors; omega(0) = 1 is enforced for constant,
    step and tabulated profiles. `free` (omega = 0) and `modulated`
    (omega^2 = 1 + kappa cos(nu t), unit carrier) are exempt.
    """
    kind: str
    omega0: float = 1.0        # constant
    omega1: float = 1.0        # step: frequency after the switch
    t_switch: float = 0.0      # step: switch time
    kappa: float = 0.0         # modulated: depth
    nu: float = 0.0            # modulated: modulation frequency
    times: Optional[np.ndarray] = None      # tabulated
    omega_sq: Optional[np.ndarray] = None   # tabulated
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ProfileError(f"Unknown profile kind '{self.kind}', expected one of {PROFILE_KINDS}")

        if self.kind == "constant":
            if not (math.isfinite(self.omega0) and self.omega0 > 0):
                raise ProfileError(f"Constant frequency must be positive, got {self.omega0}")
            if abs(self.omega0 - 1.0) > UNIT_FREQUENCY_TOL:
                raise ProfileError(f"omega(0) must be 1 in lab units, got constant omega0={self.omega0}")

        elif self.kind == "step":
            if not (math.isfinite(self.omega1) and self.omega1 > 0):
                raise ProfileError(f"Step frequency must be positive, got {self.omega1}")
            if not (math.isfinite(self.t_switch) and self.t_switch >= 0):
                raise ProfileError(f"Step switch time must be >= 0, got {self.t_switch}")

        elif self.kind == "modulated":
            if not (math.isfinite(self.kappa) and math.isfinite(self.nu)):
                raise ProfileError(f"Modulation parameters must be finite, got kappa={self.kappa}, nu={self.nu}")

        elif self.kind == "tabulated":
            self._validate_table()

    def _validate_table(self) -> None:
        if self.times is None or self.omega_sq is None:
            raise ProfileError("Tabulated profile needs both times and omega_sq")
        times = np.asarray(self.times, dtype=float)
        omega_sq = np.asarray(self.omega_sq, dtype=float)
        if times.ndim != 1 or times.shape != omega_sq.shape or len(times) < 2:
            raise ProfileError("Tabulated arrays must be 1-D, of equal length >= 2")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(omega_sq))):
            raise ProfileError("Tabulated arrays must be finite")
        if np.any(np.diff(times) <= 0):
            raise ProfileError("Tabulated times must be strictly increasing")
        if times[0] != 0.0:
            raise ProfileError(f"Tabulated times must start at t=0, got {times[0]}")
        if abs(omega_sq[0] - 1.0) > UNIT_FREQUENCY_TOL:
            raise ProfileError(f"omega(0) must be 1 in lab units, got omega_sq[0]={omega_sq[0]}")
        times.flags.writeable = False
        omega_sq.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "omega_sq", omega_sq)
        object.__setattr__(self, "_spline", CubicSpline(times, omega_sq))

    # --- constructors ---

    @classmethod
    def constant(cls, omega0: float = 1.0) -> "FrequencyProfile":
        return cls(kind="constant", omega0=float(omega0))

    @classmethod
    def free(cls) -> "FrequencyProfile":
        return cls(kind="free")

    @classmethod
    def step(cls, omega1: float, t_switch: float = 0.0) -> "FrequencyProfile":
        return cls(kind="step", omega1=float(omega1), t_switch=float(t_switch))

    @classmethod
    def modulated(cls, kappa: float, nu: float) -> "FrequencyProfile":
        return cls(kind="modulated", kappa=float(kappa), nu=float(nu))

    @classmethod
    def tabulated(cls, times: Sequence[float], omega_sq: Sequence[float]) -> "FrequencyProfile":
        return cls(kind="tabulated", times=np.array(times, dtype=float), omega_sq=np.array(omega_sq, dtype=float))

    # --- evaluation ---

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Interior times where omega^2 jumps."""
        if self.kind == "step" and self.t_switch > 0:
            return (self.t_switch,)
        return ()

    @property
    def t_max(self) -> float:
        if self.kind == "tabulated":
            return float(self.times[-1])
        return math.inf

    def omega_squared(self, t: float, segment: Optional[int] = None) -> float:
        """
        omega^2 at time t.

        For the step profile `segment` selects the branch (0 before the
        switch, 1 after) so integration pieces never straddle the jump.
        """
        kind = self.kind
        if kind == "constant":
            return self.omega0 ** 2
        if kind == "free":
            return 0.0
        if kind == "step":
            if segment is None:
                segment = 0 if t < self.t_switch else 1
            return 1.0 if segment == 0 and self.t_switch > 0 else self.omega1 ** 2
        if kind == "modulated":
            return 1.0 + self.kappa * math.cos(self.nu * t)

        # tabulated
        if t < self.times[0] or t > self.times[-1]:
            raise ProfileRangeError(
                f"Tabulated profile queried at t={t}, outside [{self.times[0]}, {self.times[-1]}]"
            )
        return float(self._spline(t))

    def describe(self) -> Dict[str, Any]:
        """Plain-dict description (metadata sidecars, logs)."""
        if self.kind == "constant":
            return {"kind": "constant", "omega0": self.omega0}
        if self.kind == "free":
            return {"kind": "free"}
        if self.kind == "step":
            return {"kind": "step", "omega1": self.omega1, "t_switch": self.t_switch}
        if self.kind == "modulated":
            return {"kind": "modulated", "kappa": self.kappa, "nu": self.nu}
        return {
            "kind": "tabulated",
            "times": self.times.tolist(),
            "omega_sq": self.omega_sq.tolist(),
        }


# =====================================================================
# Samples and trajectories
# =====================================================================

def wronskian_defect(eps: complex, deps: complex) -> float:
    """|eps' eps* - eps'* eps - 2i|."""
    w = deps * np.conj(eps) - np.conj(deps) * eps
    return float(abs(w - WRONSKIAN))


@dataclass(frozen=True)
class TrajectorySample:
    """(t, eps, eps') at one time, with the continuously tracked phase of eps."""
    t: float
    eps: complex
    deps: complex
    phase: Optional[float] = None

    def __post_init__(self):
        eps, deps = complex(self.eps), complex(self.deps)
        if not all(math.isfinite(v) for v in (self.t, eps.real, eps.imag, deps.real, deps.imag)):
            raise NonFiniteError(f"TrajectorySample must be finite, got t={self.t}, eps={eps}, deps={deps}")
        tol = get_settings().wronskian_tol
        defect = wronskian_defect(eps, deps)
        if defect >= tol:
            raise InputError(f"Sample at t={self.t} violates the Wronskian: defect {defect:.3e} >= {tol:.1e}")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "deps", deps)
        phase = math.atan2(eps.imag, eps.real) if self.phase is None else float(self.phase)
        object.__setattr__(self, "phase", phase)

    @classmethod
    def initial(cls) -> "TrajectorySample":
        return cls(t=0.0, eps=1.0 + 0j, deps=1j, phase=0.0)

    @property
    def abs_eps(self) -> float:
        return abs(self.eps)

    @property
    def wronskian_defect(self) -> float:
        return wronskian_defect(self.eps, self.deps)


@dataclass(frozen=True, eq=False)
class EpsilonTrajectory:
    """Samples of eps(t), eps'(t) and the unwrapped phase of eps on a time mesh."""
    times: np.ndarray
    eps: np.ndarray
    deps: np.ndarray
    phase: np.ndarray
    profile: FrequencyProfile
    solver_tol: float
    method: str = "exact"
    dense: Tuple[Tuple[float, float, OdeSolution], ...] = field(default=(), repr=False)

    def __post_init__(self):
        arrays = {}
        for name, dtype in (("times", float), ("eps", complex), ("deps", complex), ("phase", float)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.flags.writeable = False
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = len(arrays["times"])
        if n < 1 or any(len(a) != n for a in arrays.values()):
            raise InputError("Trajectory arrays must be non-empty and of equal length")
        if np.any(np.diff(arrays["times"]) <= 0) or arrays["times"][0] < 0:
            raise InputError("Trajectory times must be increasing and start at t >= 0")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def wronskian_defects(self) -> np.ndarray:
        w = self.deps * np.conj(self.eps) - np.conj(self.deps) * self.eps
        return np.abs(w - WRONSKIAN)

    def sample(self, index: int) -> TrajectorySample:
        return TrajectorySample(
            t=float(self.times[index]),
            eps=complex(self.eps[index]),
            deps=complex(self.deps[index]),
            phase=float(self.phase[index]),
        )

    def samples(self) -> List[TrajectorySample]:
        return [self.sample(i) for i in range(len(self))]

    def sample_at(self, t: float) -> TrajectorySample:
        """Off-mesh sample from the solver's dense output (or the closed form)."""
        if t < 0 or t > self.t_end * (1 + 1e-12):
            raise InputError(f"t={t} outside trajectory range [0, {self.t_end}]")
        t = min(float(t), self.t_end)
        if not self.dense:
            eps, deps = reference_epsilon(self.profile, t)
            phase = float(np.interp(t, self.times, self.phase))
            # correct the interpolated phase onto the exact branch
            phase += _wrap(math.atan2(eps.imag, eps.real) - phase)
            return TrajectorySample(t=float(t), eps=eps, deps=deps, phase=phase)
        for start, stop, sol in self.dense:
            if start <= t <= stop:
                y = sol(t)
                return TrajectorySample(t=float(t), eps=complex(y[0]), deps=complex(y[1]), phase=float(y[2].real))
        raise InputError(f"No dense segment covers t={t}")

    def certify(self, tol: Optional[float] = None) -> float:
        """
        Check the trajectory invariants; returns the Wronskian residual.

        Raises IntegrationError when the initial data are not (1, i), the
        Wronskian residual exceeds `tol`, or eps vanishes at a sample.
        """
        tol = get_settings().wronskian_tol if tol is None else tol
        if self.times[0] == 0 and (self.eps[0] != 1 or self.deps[0] != 1j):
            raise IntegrationError(f"Initial data must be (1, i), got ({self.eps[0]}, {self.deps[0]})")
        residual = wronskian_residual(self)
        if residual >= tol:
            raise IntegrationError(f"Wronskian residual {residual:.3e} exceeds {tol:.1e}")
        if np.any(np.abs(self.eps) <= 0):
            raise IntegrationError("eps(t) vanished at a sample")
        return residual


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


# =====================================================================
# Solver
# =====================================================================

def _output_mesh(t_end: float, dt_out: float) -> np.ndarray:
    n = int(math.floor(t_end / dt_out + 1e-9))
    times = dt_out * np.arange(n + 1)
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        return np.append(times, t_end)
    times[-1] = t_end
    return times


def _integrator_tolerances(tol: float) -> Tuple[float, float]:
    return max(tol * RTOL_FACTOR, MIN_RTOL), tol * ATOL_FACTOR


def _mode_rhs(profile: FrequencyProfile, segment: int) -> Callable[[float, np.ndarray], np.ndarray]:
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        eps, deps = y[0], y[1]
        abs2 = (eps * np.conj(eps)).real
        return np.array([
            deps,
            -profile.omega_squared(t, segment) * eps,
            (deps * np.conj(eps)).imag / abs2,
        ], dtype=complex)
    return rhs


def _segments(profile: FrequencyProfile, t_start: float, t_stop: float) -> List[Tuple[float, float, int]]:
    """Integration pieces [a, b] with the branch index of a step profile."""
    lo, hi = min(t_start, t_stop), max(t_start, t_stop)
    cuts = [lo] + [b for b in profile.breakpoints if lo < b < hi] + [hi]
    pieces = []
    for k in range(len(cuts) - 1):
        a, b = cuts[k], cuts[k + 1]
        segment = 0 if (profile.kind == "step" and profile.t_switch > 0 and b <= profile.t_switch) else 1
        pieces.append((a, b, segment))
    return pieces


def solve_epsilon(
    profile: FrequencyProfile,
    t_end: float,
    dt_out: float,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> EpsilonTrajectory:
    """
    Integrate the mode equation from t=0 to t_end, sampled every dt_out.

    Steps in omega^2 are integration boundaries, so (eps, eps') stay
    continuous across them and the integrator keeps its design order.
    """
    settings = get_settings()
    tol = settings.solver_tol if tol is None else float(tol)
    method = settings.solver_method if method is None else method.upper()

    if not (MIN_SOLVER_TOL <= tol <= MAX_SOLVER_TOL):
        raise InputError(f"Solver tolerance must lie in [{MIN_SOLVER_TOL}, {MAX_SOLVER_TOL}], got {tol}")
    if not (t_end > 0 and math.isfinite(t_end)):
        raise InputError(f"t_end must be positive and finite, got {t_end}")
    if not (dt_out > 0 and math.isfinite(dt_out)):
        raise InputError(f"dt_out must be positive and finite, got {dt_out}")
    if t_end > profile.t_max:
        raise ProfileRangeError(f"t_end={t_end} beyond tabulated range {profile.t_max}")

    times = _output_mesh(t_end, dt_out)
    rtol, atol = _integrator_tolerances(tol)
    eps = np.empty(len(times), dtype=complex)
    deps = np.empty(len(times), dtype=complex)
    phase = np.empty(len(times), dtype=float)

    y = np.array([1.0, 1j, 0.0], dtype=complex)
    dense = []
    n_steps = 0
    for a, b, segment in _segments(profile, 0.0, t_end):
        mask = (times >= a) & (times <= b)
        sol = solve_ivp(
            _mode_rhs(profile, segment),
            (a, b),
            y,
            method=method,
            t_eval=times[mask],
            dense_output=True,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise IntegrationError(f"Mode equation failed on [{a}, {b}]: {sol.message}")
        if not np.all(np.isfinite(sol.y)):
            raise NonFiniteError(f"Non-finite state while integrating on [{a}, {b}]")
        eps[mask] = sol.y[0]
        deps[mask] = sol.y[1]
        phase[mask] = sol.y[2].real
        dense.append((a, b, sol.sol))
        n_steps += sol.nfev
        y = sol.sol(b)

    # initial data are exact, not integrated
    eps[0], deps[0], phase[0] = 1.0, 1j, 0.0

    traj = EpsilonTrajectory(
        times=times,
        eps=eps,
        deps=deps,
        phase=phase,
        profile=profile,
        solver_tol=tol,
        method=method,
        dense=tuple(dense),
    )
    logger.debug(
        f"solve_epsilon({profile.kind}): {len(times)} samples to t={t_end}, "
        f"{n_steps} rhs evaluations, Wronskian residual {wronskian_residual(traj):.2e}"
    )
    return traj


def wronskian_residual(traj: EpsilonTrajectory) -> float:
    """max over samples of |eps' eps* - eps'* eps - 2i|."""
    return float(np.max(traj.wronskian_defects()))


def time_reversal_residual(traj: EpsilonTrajectory, tol: Optional[float] = None) -> float:
    """
    Integrate the final state of `traj` back to t=0; returns |eps - 1| + |eps' - i|.
    """
    tol = traj.solver_tol if tol is None else tol
    method = traj.method if traj.method != "exact" else get_settings().solver_method
    rtol, atol = _integrator_tolerances(tol)
    y = np.array([traj.eps[-1], traj.deps[-1], traj.phase[-1]], dtype=complex)
    for a, b, segment in reversed(_segments(traj.profile, 0.0, traj.t_end)):
        sol = solve_ivp(_mode_rhs(traj.profile, segment), (b, a), y, method=method, rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegrationError(f"Backward integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
    return float(abs(y[0] - 1.0) + abs(y[1] - 1j))


# =====================================================================
# Closed forms
# =====================================================================

def reference_epsilon(profile: FrequencyProfile, t: float) -> Tuple[complex, complex]:
    """(eps(t), eps'(t)) from the closed form of a constant, free or step profile."""
    if profile.kind not in ANALYTIC_KINDS:
        raise ProfileError(f"No closed form for profile kind '{profile.kind}'")
    if t < 0:
        raise InputError(f"Closed forms are defined for t >= 0, got t={t}")

    if profile.kind == "free":
        return complex(1.0, t), 1j

    if profile.kind == "constant":
        return _harmonic(1.0 + 0j, 1j, profile.omega0, t)

    # step: unit frequency up to t_switch, then omega1
    ts = profile.t_switch
    if t <= ts and ts > 0:
        return _harmonic(1.0 + 0j, 1j, 1.0, t)
    eps_s, deps_s = _harmonic(1.0 + 0j, 1j, 1.0, ts) if ts > 0 else (1.0 + 0j, 1j)
    return _harmonic(eps_s, deps_s, profile.omega1, t - ts)


def _harmonic(eps0: complex, deps0: complex, omega: float, tau: float) -> Tuple[complex, complex]:
    c, s = math.cos(omega * tau), math.sin(omega * tau)
    eps = eps0 * c + deps0 * s / omega
    deps = -eps0 * omega * s + deps0 * c
    return complex(eps), complex(deps)


def reference_trajectory(profile: FrequencyProfile, t_end: float, dt_out: float) -> EpsilonTrajectory:
    """
    Exactly constructed trajectory of an analytically solvable profile.

    The phase is unwrapped on a 16x refined mesh, where consecutive
    increments stay far below pi.
    """
    times = _output_mesh(t_end, dt_out)
    refine = 16
    fine = np.linspace(0.0, times[-1], refine * (len(times) - 1) + 1) if len(times) > 1 else times
    fine = np.union1d(fine, times)
    fine_eps = np.array([reference_epsilon(profile, t)[0] for t in fine])
    fine_phase = np.unwrap(np.angle(fine_eps))
    idx = np.searchsorted(fine, times)

    pairs = [reference_epsilon(profile, t) for t in times]
    return EpsilonTrajectory(
        times=times,
        eps=np.array([p[0] for p in pairs]),
        deps=np.array([p[1] for p in pairs]),
        phase=fine_phase[idx],
        profile=profile,
        solver_tol=0.0,
        method="exact",
    )
