import math

import numpy as np
import pytest

from oscillator.numerics import InputError, NumericalError, SpatialGrid
from oscillator.trajectory import FrequencyProfile, reference_trajectory, solve_epsilon
from oscillator.states import (
    FockVector,
    GridAdequacyError,
    GridResolutionError,
    MomentSummary,
    TruncationError,
    analytic_moments,
    cat_coeffs,
    cat_state,
    coherent_coeffs,
    coherent_state,
    eigen_residual,
    even_cat_norm,
    fock_decompose,
    fock_synthesize,
    grid_for_state,
    ground_state,
    moments,
    number_expectation,
    number_state,
    odd_cat_norm,
    orthonormality_defect,
    overlap,
    squeezing_series,
)


SAMPLES = ["initial_sample", "free_sample", "squeezed_sample"]


def traj_sigma_x(traj, t: float) -> float:
    return traj.sample_at(t).abs_eps ** 2 / 2


# ----- ground and coherent states -----

@pytest.mark.parametrize("fixture", SAMPLES)
def test_ground_state_normalized(fixture, request):
    wf = ground_state(request.getfixturevalue(fixture))
    assert wf.norm == pytest.approx(1.0, abs=1e-6)


def test_ground_state_at_t0_is_gaussian(initial_sample):
    wf = ground_state(initial_sample)
    x = wf.grid.points
    np.testing.assert_allclose(wf.values, math.pi ** -0.25 * np.exp(-x * x / 2), atol=1e-14)


def test_coherent_state_displacement(initial_sample):
    wf = coherent_state(1.0, initial_sample)
    m = moments(wf)
    assert m.mean_x == pytest.approx(math.sqrt(2.0), abs=1e-6)
    assert m.mean_p == pytest.approx(0.0, abs=1e-6)
    assert m.sigma_x == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("fixture", SAMPLES)
@pytest.mark.parametrize("alpha", [0.0, 1.0, 0.7 - 1.2j])
def test_coherent_state_is_eigenstate_of_a(fixture, alpha, request):
    wf = coherent_state(alpha, request.getfixturevalue(fixture))
    assert wf.norm == pytest.approx(1.0, abs=1e-6)
    assert eigen_residual(wf, alpha) < 1e-6


@pytest.mark.parametrize("fixture", SAMPLES)
@pytest.mark.parametrize("alpha", [0.0, 0.5 + 0.5j])
def test_grid_moments_match_closed_form(fixture, alpha, request):
    sample = request.getfixturevalue(fixture)
    grid_m = moments(coherent_state(alpha, sample))
    exact = analytic_moments(sample, alpha)
    assert grid_m.sigma_x == pytest.approx(exact.sigma_x, abs=1e-7)
    assert grid_m.sigma_p == pytest.approx(exact.sigma_p, abs=1e-7)
    assert grid_m.sigma_xp == pytest.approx(exact.sigma_xp, abs=1e-7)
    assert grid_m.mean_x == pytest.approx(exact.mean_x, abs=1e-7)
    assert grid_m.schrodinger_residual < 1e-7
    assert exact.schrodinger_residual < 1e-12


def test_analytic_moments_free_particle(free_sample):
    m = analytic_moments(free_sample)
    assert m.sigma_x == pytest.approx(1.0)
    assert m.sigma_p == pytest.approx(0.5)
    assert m.sigma_xp == pytest.approx(0.5)
    assert m.corr == pytest.approx(1 / math.sqrt(2.0))
    assert m.robertson_defect == pytest.approx(0.0, abs=1e-12)


CLOSED_FORM_PROFILES = [
    FrequencyProfile.constant(),
    FrequencyProfile.free(),
    FrequencyProfile.step(0.5),
    FrequencyProfile.step(3.0),
    FrequencyProfile.step(2.0, t_switch=1.3),
]


@pytest.mark.parametrize("profile", CLOSED_FORM_PROFILES, ids=["constant", "free", "step_0.5", "step_3", "step_delayed"])
def test_uncertainty_identity_is_exact_on_closed_forms(profile):
    traj = reference_trajectory(profile, 10.0, 0.5)
    for sample in traj.samples()[:20]:
        assert analytic_moments(sample, 1.0 + 0.5j).schrodinger_residual < 1e-12


def test_uncertainty_identity_along_solved_trajectories():
    for profile in (FrequencyProfile.free(), FrequencyProfile.step(3.0), FrequencyProfile.modulated(0.5, 2.0)):
        traj = solve_epsilon(profile, 10.0, 0.5)
        for sample in traj.samples()[:20]:
            assert analytic_moments(sample, 1.0).schrodinger_residual < 1e-9


def test_grid_moments_under_strong_chirp():
    # |eps| ~ 6 at the end of the resonant run; the chirp dominates the edge wavenumber
    alpha = 1.0 + 0.5j
    traj = solve_epsilon(FrequencyProfile.modulated(0.5, 2.0), 20.0, 0.5)
    for t in (19.0, 19.5, 20.0):
        sample = traj.sample_at(t)
        grid_m = moments(coherent_state(alpha, sample))
        exact = analytic_moments(sample, alpha)
        assert grid_m.sigma_x == pytest.approx(exact.sigma_x, rel=1e-6)
        assert grid_m.sigma_p == pytest.approx(exact.sigma_p, rel=1e-6)
        assert grid_m.sigma_xp == pytest.approx(exact.sigma_xp, rel=1e-6, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("profile", [
    FrequencyProfile.constant(),
    FrequencyProfile.step(2.0),
    FrequencyProfile.modulated(0.5, 2.0),
], ids=lambda p: p.kind)
def test_grid_moments_track_closed_form_along_trajectory(profile):
    alpha = 1.0 + 0.5j
    traj = solve_epsilon(profile, 20.0, 1.0)
    for sample in traj.samples()[1:]:
        grid_m = moments(coherent_state(alpha, sample))
        exact = analytic_moments(sample, alpha)
        for name in ("mean_x", "mean_p", "sigma_x", "sigma_p", "sigma_xp"):
            got, want = getattr(grid_m, name), getattr(exact, name)
            assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), (sample.t, name, got, want)


def test_moment_summary_rejects_non_physical_values():
    with pytest.raises(NumericalError):
        MomentSummary.from_second_moments(0.0, 0.0, -1.0, 0.5, 0.0)


# ----- number states -----

def test_number_states_orthonormal(free_sample):
    assert orthonormality_defect(free_sample, 10) < 1e-6


@pytest.mark.parametrize("n", [0, 1, 3, 10])
def test_number_expectation(n, free_sample):
    wf = number_state(n, free_sample)
    assert number_expectation(wf) == pytest.approx(n, abs=1e-6)


def test_number_state_bounds(initial_sample):
    with pytest.raises(InputError):
        number_state(61, initial_sample)
    with pytest.raises(InputError):
        number_state(-1, initial_sample)


def test_number_state_matches_hermite_closed_form(free_sample):
    from scipy.special import eval_hermite

    n = 4
    wf = number_state(n, free_sample)
    x = wf.grid.points
    eps, deps, theta = free_sample.eps, free_sample.deps, free_sample.phase
    ground = math.pi ** -0.25 * abs(eps) ** -0.5 * np.exp(-0.5j * theta) * np.exp(1j * deps * x * x / (2 * eps))
    expected = ground * np.exp(-1j * n * theta) * eval_hermite(n, x / abs(eps)) / math.sqrt(2 ** n * math.factorial(n))
    np.testing.assert_allclose(wf.values, expected, atol=1e-12)


# ----- cats -----

@pytest.mark.parametrize("alpha", [0.5, 1.5, 3.0, 1.5j])
def test_even_and_odd_cats_are_orthogonal(alpha, free_sample):
    grid = grid_for_state(free_sample, alpha=alpha)
    even = cat_state("even", alpha, free_sample, grid)
    odd = cat_state("odd", alpha, free_sample, grid)
    assert even.norm == pytest.approx(1.0, abs=1e-6)
    assert odd.norm == pytest.approx(1.0, abs=1e-6)
    assert abs(overlap(even, odd)) < 1e-8


@pytest.mark.parametrize("parity", ["even", "odd"])
@pytest.mark.parametrize("fixture", SAMPLES)
def test_cats_are_eigenstates_of_a_squared(parity, fixture, request):
    alpha = 1.5 + 0.5j
    wf = cat_state(parity, alpha, request.getfixturevalue(fixture))
    assert eigen_residual(wf, alpha ** 2, power=2) < 1e-5


def test_even_cat_small_alpha_approaches_ground(initial_sample):
    grid = grid_for_state(initial_sample)
    cat = cat_state("even", 1e-4, initial_sample, grid)
    assert abs(overlap(ground_state(initial_sample, grid), cat)) == pytest.approx(1.0, abs=1e-7)


def test_odd_cat_needs_nonzero_alpha(initial_sample):
    with pytest.raises(InputError):
        cat_state("odd", 1e-4, initial_sample)


def test_cat_norm_constants():
    assert even_cat_norm(0.0) == pytest.approx(0.5)
    a2 = 2.25
    assert odd_cat_norm(1.5) == pytest.approx(math.exp(a2 / 2) / (2 * math.sqrt(math.sinh(a2))))


def test_even_cat_spreads_beyond_vacuum(initial_sample):
    # <x^2> = 1/2 + a^2 (1 + tanh a^2) for real a, <x> = 0
    alpha = 2.0
    m = moments(cat_state("even", alpha, initial_sample))
    assert m.sigma_x > 0.5
    assert m.sigma_x == pytest.approx(0.5 + alpha ** 2 * (1 + math.tanh(alpha ** 2)), rel=1e-6)
    assert not m.squeezed


def test_alpha_bound(initial_sample):
    with pytest.raises(InputError):
        coherent_state(6.5, initial_sample)


# ----- grid policy -----

def test_narrow_grid_is_rejected(initial_sample):
    with pytest.raises(GridAdequacyError):
        ground_state(initial_sample, SpatialGrid(-2.0, 2.0, 101))


def test_coarse_grid_is_rejected(initial_sample):
    wf = coherent_state(2j, initial_sample, SpatialGrid(-8.0, 8.0, 161))
    with pytest.raises(GridResolutionError):
        moments(wf)


def test_auto_grid_covers_displaced_packet(initial_sample):
    grid = grid_for_state(initial_sample, alpha=3.0, centered=True)
    assert grid.x_min < 3 * math.sqrt(2.0) < grid.x_max
    assert grid.n_points % 2 == 1


# ----- Fock space -----

def test_glauber_expansion_reproduces_coherent_state(free_sample):
    alpha = 1.0 + 0.3j
    grid = grid_for_state(free_sample, n_quanta=12)
    synthesized = fock_synthesize(coherent_coeffs(alpha, 40), free_sample, grid)
    direct = coherent_state(alpha, free_sample, grid)
    assert np.max(np.abs(synthesized.values - direct.values)) < 1e-7


def test_cat_expansion_reproduces_cat_state(squeezed_sample):
    alpha = 1.2
    grid = grid_for_state(squeezed_sample, n_quanta=12)
    synthesized = fock_synthesize(cat_coeffs("odd", alpha, 40), squeezed_sample, grid)
    direct = cat_state("odd", alpha, squeezed_sample, grid)
    assert np.max(np.abs(synthesized.values - direct.values)) < 1e-7


def test_fock_decompose_number_state(free_sample):
    coeffs = fock_decompose(number_state(3, free_sample), n_max=12)
    expected = np.zeros(13)
    expected[3] = 1.0
    np.testing.assert_allclose(np.abs(coeffs.coeffs), expected, atol=1e-8)


def test_fock_coefficients_are_time_independent(free_sample, squeezed_sample):
    coeffs = coherent_coeffs(0.8 - 0.4j, 32)
    first = fock_decompose(fock_synthesize(coeffs, free_sample), 32)
    second = fock_decompose(fock_synthesize(coeffs, squeezed_sample), 32)
    np.testing.assert_allclose(first.coeffs, second.coeffs, atol=1e-7)
    np.testing.assert_allclose(first.coeffs, coeffs.coeffs, atol=1e-7)


def test_truncated_fock_vector_is_rejected():
    with pytest.raises(TruncationError):
        coherent_coeffs(3.0, 10)
    with pytest.raises(InputError):
        FockVector(np.ones(5))


def test_cat_coefficients_have_definite_parity():
    even = cat_coeffs("even", 1.5)
    odd = cat_coeffs("odd", 1.5)
    assert np.all(even.coeffs[1::2] == 0)
    assert np.all(odd.coeffs[0::2] == 0)
    assert even.norm_squared == pytest.approx(1.0, abs=1e-12)
    assert odd.norm_squared == pytest.approx(1.0, abs=1e-12)


# ----- squeezing -----

def test_step_profile_squeezing_minimum(step2_trajectory):
    series = squeezing_series(step2_trajectory)
    assert series.min_sigma_x == pytest.approx(0.125, abs=1e-6)
    # minima at pi/4 + k pi/2 are degenerate
    offset = (series.t_min - math.pi / 4) % (math.pi / 2)
    assert min(offset, math.pi / 2 - offset) < 1e-4
    assert traj_sigma_x(step2_trajectory, series.t_min) == pytest.approx(0.125, abs=1e-8)
    assert series.any_squeezed


def test_squeezing_closed_form(step2_trajectory):
    series = squeezing_series(step2_trajectory)
    t = series.times
    expected = (np.cos(2 * t) ** 2 + 0.25 * np.sin(2 * t) ** 2) / 2
    np.testing.assert_allclose(series.sigma_x, expected, atol=1e-8)


def test_constant_frequency_never_squeezes():
    series = squeezing_series(solve_epsilon(FrequencyProfile.constant(), 20.0, 0.05))
    np.testing.assert_allclose(series.sigma_x, 0.5, atol=1e-8)
    assert not series.any_squeezed


def test_squeezed_state_grid_moments(squeezed_sample):
    m = moments(ground_state(squeezed_sample))
    assert m.sigma_x == pytest.approx(0.125, abs=1e-7)
    assert m.squeezed
