"""Structure-preserving implicit schemes for Wasserstein gradient flows."""

__version__ = "0.1.0"

from .benchmarks import ProblemSpec, build_problem
from .energy import (
    CustomH,
    EnergyModel,
    Entropy,
    Potential,
    PowerLaw,
    Splitting,
    make_splitting,
)
from .grid import Grid, build_grid
from .runner import convergence_study, scheme_config, simulate
from .schemes import Scheme, SchemeConfig, StepFailure, TimeState, advance, init_state

__all__ = [
    "CustomH",
    "EnergyModel",
    "Entropy",
    "Grid",
    "Potential",
    "PowerLaw",
    "ProblemSpec",
    "Scheme",
    "SchemeConfig",
    "Splitting",
    "StepFailure",
    "TimeState",
    "advance",
    "build_grid",
    "build_problem",
    "convergence_study",
    "init_state",
    "make_splitting",
    "scheme_config",
    "simulate",
]
