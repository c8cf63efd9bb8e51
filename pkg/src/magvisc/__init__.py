"""One-dimensional magneto-viscoelastic model with a weakly singular memory kernel."""

__version__ = "0.1.0"

from .kernel import Constant, Fractional, PronySeries, RelaxationKernel, make_kernel
from .field import Forcing, Grid, InitialData
from .dynamics import Mode, ModelParams, Trajectory, run
from .diagnostics import (
    AprioriBounds,
    EnergyReport,
    TestFunction,
    apriori_bounds,
    check_lemma21,
    check_lemma22,
    energy,
    weak_residual,
)
from .experiments import Scenario, SweepResult, delta_sweep, epsilon_sweep, refinement_study

__all__ = [
    "AprioriBounds",
    "Constant",
    "EnergyReport",
    "Forcing",
    "Fractional",
    "Grid",
    "InitialData",
    "Mode",
    "ModelParams",
    "PronySeries",
    "RelaxationKernel",
    "Scenario",
    "SweepResult",
    "TestFunction",
    "Trajectory",
    "apriori_bounds",
    "check_lemma21",
    "check_lemma22",
    "delta_sweep",
    "energy",
    "epsilon_sweep",
    "make_kernel",
    "refinement_study",
    "run",
    "weak_residual",
]
