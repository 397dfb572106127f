import dataclasses
import math

import numpy as np
import pytest

from oscillator.numerics import InputError
from oscillator.trajectory import (
    EpsilonTrajectory,
    FrequencyProfile,
    IntegrationError,
    ProfileError,
    ProfileRangeError,
    TrajectorySample,
    _output_mesh,
    reference_epsilon,
    reference_trajectory,
    solve_epsilon,
    time_reversal_residual,
    wronskian_residual,
)


def chirp_profile() -> FrequencyProfile:
    times = np.linspace(0.0, 20.0, 401)
    return FrequencyProfile.tabulated(times, (1.0 + 0.05 * times) ** 2)


WRONSKIAN_PROFILES = {
    "constant": FrequencyProfile.constant(),
    "free": FrequencyProfile.free(),
    "step_0.5": FrequencyProfile.step(0.5),
    "step_2": FrequencyProfile.step(2.0),
    "step_3": FrequencyProfile.step(3.0),
    "step_delayed": FrequencyProfile.step(2.0, t_switch=1.3),
    "modulated": FrequencyProfile.modulated(0.5, 2.0),
    "tabulated_chirp": chirp_profile(),
}


# ----- profiles -----

def test_constant_profile_requires_unit_frequency():
    with pytest.raises(ProfileError):
        FrequencyProfile.constant(2.0)


@pytest.mark.parametrize("omega1", [0.0, -1.0, math.inf])
def test_step_profile_rejects_bad_frequency(omega1):
    with pytest.raises(ProfileError):
        FrequencyProfile.step(omega1)


def test_tabulated_profile_validation():
    with pytest.raises(ProfileError):
        FrequencyProfile.tabulated([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
    with pytest.raises(ProfileError):
        FrequencyProfile.tabulated([0.1, 1.0], [1.0, 1.0])
    with pytest.raises(ProfileError):
        FrequencyProfile.tabulated([0.0, 1.0], [2.0, 1.0])


def test_profile_errors_are_input_errors():
    assert issubclass(ProfileError, InputError)
    assert issubclass(ProfileError, ValueError)


def test_step_profile_branches():
    profile = FrequencyProfile.step(2.0, t_switch=1.0)
    assert profile.omega_squared(0.5) == 1.0
    assert profile.omega_squared(1.5) == 4.0
    assert profile.breakpoints == (1.0,)


def test_tabulated_query_out_of_range():
    profile = FrequencyProfile.tabulated([0.0, 1.0, 2.0], [1.0, 1.5, 2.0])
    with pytest.raises(ProfileRangeError):
        profile.omega_squared(2.5)


def test_tabulated_solve_beyond_table():
    profile = FrequencyProfile.tabulated([0.0, 2.5, 5.0], [1.0, 1.5, 2.0])
    with pytest.raises(ProfileRangeError):
        solve_epsilon(profile, 6.0, 0.1)


# ----- samples -----

def test_sample_rejects_wronskian_violation():
    with pytest.raises(InputError):
        TrajectorySample(t=0.0, eps=1.0, deps=1.1j)


def test_sample_default_phase():
    sample = TrajectorySample(t=1.0, eps=1 + 1j, deps=1j)
    assert sample.phase == pytest.approx(math.pi / 4)
    assert sample.wronskian_defect < 1e-15


# ----- output mesh -----

def test_output_mesh_appends_t_end():
    np.testing.assert_allclose(_output_mesh(1.0, 0.3), [0.0, 0.3, 0.6, 0.9, 1.0])


def test_output_mesh_lands_on_t_end():
    times = _output_mesh(1.0, 0.1)
    assert len(times) == 11
    assert times[-1] == 1.0


# ----- solver -----

@pytest.mark.parametrize("name", sorted(WRONSKIAN_PROFILES))
def test_wronskian_conserved(name):
    traj = solve_epsilon(WRONSKIAN_PROFILES[name], 20.0, 0.05, tol=1e-10)
    assert wronskian_residual(traj) < 1e-9
    assert traj.eps[0] == 1 and traj.deps[0] == 1j


def test_wronskian_conserved_under_parametric_resonance():
    traj = solve_epsilon(FrequencyProfile.modulated(0.5, 2.0), 20.0, 0.05, tol=1e-10)
    assert np.max(np.abs(traj.eps)) > 5.0  # resonance pumps the mode
    assert wronskian_residual(traj) < 1e-9


@pytest.mark.parametrize("profile", [
    FrequencyProfile.constant(),
    FrequencyProfile.free(),
    FrequencyProfile.step(0.5),
    FrequencyProfile.step(3.0),
    FrequencyProfile.step(2.0, t_switch=1.3),
])
def test_solver_matches_closed_form(profile):
    traj = solve_epsilon(profile, 20.0, 0.1, tol=1e-10)
    ref = reference_trajectory(profile, 20.0, 0.1)
    assert np.max(np.abs(traj.eps - ref.eps)) < 1e-8
    assert np.max(np.abs(traj.deps - ref.deps)) < 1e-8


def test_free_particle_closed_form():
    assert reference_epsilon(FrequencyProfile.free(), 2.0) == (1 + 2j, 1j)


def test_step_squeezing_closed_form():
    eps, deps = reference_epsilon(FrequencyProfile.step(2.0), math.pi / 4)
    assert eps == pytest.approx(0.5j, abs=1e-15)
    assert deps == pytest.approx(-2.0, abs=1e-15)


def test_phase_is_continuous_and_exact_for_unit_frequency():
    traj = solve_epsilon(FrequencyProfile.constant(), 20.0, 0.5)
    # eps = e^(it): the tracked phase is t itself, well past the branch cut
    np.testing.assert_allclose(traj.phase, traj.times, atol=1e-8)


def test_phase_matches_unwrapped_reference(step2_trajectory):
    ref = reference_trajectory(FrequencyProfile.step(2.0), math.pi, math.pi / 400)
    np.testing.assert_allclose(step2_trajectory.phase, ref.phase, atol=1e-8)
    assert np.all(np.diff(step2_trajectory.phase) > 0)


def test_sample_at_uses_dense_output(step2_trajectory):
    sample = step2_trajectory.sample_at(0.123)
    eps, deps = reference_epsilon(FrequencyProfile.step(2.0), 0.123)
    assert abs(sample.eps - eps) < 1e-8
    assert abs(sample.deps - deps) < 1e-8


def test_sample_at_out_of_range(step2_trajectory):
    with pytest.raises(InputError):
        step2_trajectory.sample_at(4.0)


def test_time_reversal_returns_to_initial_data():
    traj = solve_epsilon(FrequencyProfile.step(2.0, t_switch=0.7), 10.0, 0.1, tol=1e-10)
    assert time_reversal_residual(traj) < 1e-8


def test_time_reversal_under_parametric_resonance():
    traj = solve_epsilon(FrequencyProfile.modulated(0.5, 2.0), 20.0, 0.05, tol=1e-10)
    assert time_reversal_residual(traj) < 1e-8


def test_certify_detects_corrupted_initial_data():
    traj = solve_epsilon(FrequencyProfile.constant(), 1.0, 0.1)
    assert traj.certify() < 1e-9
    deps = np.array(traj.deps)
    deps[0] = 1.1j
    with pytest.raises(IntegrationError):
        dataclasses.replace(traj, deps=deps).certify()


@pytest.mark.parametrize("kwargs", [
    {"t_end": -1.0, "dt_out": 0.1},
    {"t_end": 1.0, "dt_out": 0.0},
    {"t_end": 1.0, "dt_out": 0.1, "tol": 1e-3},
])
def test_solver_rejects_bad_arguments(kwargs):
    with pytest.raises(InputError):
        solve_epsilon(FrequencyProfile.constant(), **kwargs)


def test_corrupted_initial_derivative_breaks_the_wronskian():
    # eps(0) = 1, eps'(0) = 2i on the unit-frequency profile
    times = np.linspace(0.0, 5.0, 51)
    traj = EpsilonTrajectory(
        times=times,
        eps=np.cos(times) + 2j * np.sin(times),
        deps=-np.sin(times) + 2j * np.cos(times),
        phase=np.zeros_like(times),
        profile=FrequencyProfile.constant(),
        solver_tol=1e-10,
    )
    assert wronskian_residual(traj) >= 2.0 - 1e-12
    with pytest.raises(IntegrationError):
        traj.certify()
