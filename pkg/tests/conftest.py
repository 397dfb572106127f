"""Shared fixtures: canonical trajectory samples and solved trajectories."""

import math

import pytest

from oscillator.trajectory import FrequencyProfile, TrajectorySample, solve_epsilon


@pytest.fixture
def initial_sample() -> TrajectorySample:
    return TrajectorySample.initial()


@pytest.fixture
def free_sample() -> TrajectorySample:
    """Free particle at t=1: eps = 1 + i, eps' = i."""
    return TrajectorySample(t=1.0, eps=1 + 1j, deps=1j)


@pytest.fixture
def squeezed_sample() -> TrajectorySample:
    """Step omega 1 -> 2 at t = pi/4: eps = i/2, eps' = -2 (maximal squeezing)."""
    return TrajectorySample(t=math.pi / 4, eps=0.5j, deps=-2 + 0j, phase=math.pi / 2)


@pytest.fixture(scope="session")
def step2_trajectory():
    return solve_epsilon(FrequencyProfile.step(2.0), math.pi, math.pi / 400)
