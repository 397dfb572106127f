"""
ParamLab Oscillator Package

Modules:
  - numerics: grids, grid quadrature, finite differences, adaptive quadrature oracle
  - trajectory: frequency profiles and the mode function eps(t)
  - states: exact wavefunctions, moments, squeezing, integral of motion A
  - qdeform: q-brackets, ladder matrices, q-coherent states
  - mvhermite: multivariable Hermite polynomials, Gaussian overlaps, Franck-Condon amplitudes
  - orchestrator: runs a scenario, writes artifacts (import it directly)
"""

from oscillator.numerics import LabError, InputError, NumericalError, SpatialGrid, GridFunction
from oscillator.trajectory import FrequencyProfile, TrajectorySample, EpsilonTrajectory, solve_epsilon
from oscillator.states import WaveFunction, FockVector, MomentSummary, SqueezingSeries
from oscillator.qdeform import QParam, LadderMatrices
from oscillator.mvhermite import MultiIndex, SymmetricMatrix, OverlapSpec, RhoKernel

__version__ = "1.0.0"

__all__ = [
    "LabError",
    "InputError",
    "NumericalError",
    "SpatialGrid",
    "GridFunction",
    "FrequencyProfile",
    "TrajectorySample",
    "EpsilonTrajectory",
    "solve_epsilon",
    "WaveFunction",
    "FockVector",
    "MomentSummary",
    "SqueezingSeries",
    "QParam",
    "LadderMatrices",
    "MultiIndex",
    "SymmetricMatrix",
    "OverlapSpec",
    "RhoKernel",
]
