"""Power and sample size for recurrent-event trials analysed with the robust
Andersen-Gill Wald test."""
from .design import Design1, Design2, exposure_moments, retention_prob
from .harness import SimulationResult, empirical_power, reproduce_table
from .power import (
    DirectionError,
    Equivalence,
    NonInferiority,
    SizeResult,
    Superiority,
    power,
    sample_size,
)
from .rates import PiecewiseConstant, Weibull
from .simulate import TrialData, simulate_trial
from .agfit import AgFit, decide, fit
from .variance import TrialScenario, variance

__version__ = "0.1.0"

__all__ = [
    "Design1", "Design2", "exposure_moments", "retention_prob",
    "SimulationResult", "empirical_power", "reproduce_table",
    "DirectionError", "Equivalence", "NonInferiority", "SizeResult", "Superiority", "power", "sample_size",
    "PiecewiseConstant", "Weibull", "TrialData", "simulate_trial",
    "AgFit", "decide", "fit", "TrialScenario", "variance",
]
