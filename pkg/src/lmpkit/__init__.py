"""Verification and recovery toolkit for first-order necessary optimality
conditions (the local minimum principle) in optimal control problems with
one nonregular mixed state-control constraint."""

from .errors import EvalError, InputError, LmpkitError, NumericalError, ParseError
from .lmp import (
    CheckConfig,
    MultiplierSet,
    Report,
    SupportDirection,
    check_certificate,
)
from .measures import BVFunction, SignedMeasure, cumulative, stieltjes_integral
from .problem import ProblemDef, TimeGrid, Trajectory, builtin_example
from .recovery import RecoveryConfig, build_program, recover

__version__ = "0.1.0"

__all__ = [
    "BVFunction",
    "CheckConfig",
    "EvalError",
    "InputError",
    "LmpkitError",
    "MultiplierSet",
    "NumericalError",
    "ParseError",
    "ProblemDef",
    "RecoveryConfig",
    "Report",
    "SignedMeasure",
    "SupportDirection",
    "TimeGrid",
    "Trajectory",
    "build_program",
    "builtin_example",
    "check_certificate",
    "cumulative",
    "recover",
    "stieltjes_integral",
    "__version__",
]
