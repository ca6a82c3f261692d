"""Robust feedback optimization for stable linear plants with inexact sensitivities.

The package provides the plant and steady-state maps, uncertainty sets and
their worst cases, the regularized controllers, closed-loop simulation, the
tracking-bound analysis and a linearized distribution-feeder case.
"""

from .analysis import (BoundReport, TheoremConstants, compute_constants, iss_bound,
                       max_step_size, verify_bound)
from .closed_loop import Scenario, TrajectoryLog, run
from .controllers import (ROBUST_L1, ROBUST_L2, STANDARD, ControllerConfig, ControllerState,
                          controller_step, make_config)
from .errors import RobustFOError
from .plant import LtiPlant, SignalSchedule, StaticPlant, sensitivity
from .problems import Regularizer, RobustProblem, exact_regularizer
from .uncertainty import UncertaintySet, worst_case_value

__all__ = [
    "BoundReport", "ControllerConfig", "ControllerState", "LtiPlant", "ROBUST_L1",
    "ROBUST_L2", "Regularizer", "RobustFOError", "RobustProblem", "STANDARD", "Scenario",
    "SignalSchedule", "StaticPlant", "TheoremConstants", "TrajectoryLog", "UncertaintySet",
    "compute_constants", "controller_step", "exact_regularizer", "iss_bound", "make_config",
    "max_step_size", "run", "sensitivity", "verify_bound", "worst_case_value",
]
