"""Explicit continuous Runge-Kutta solvers for delay differential equations.

Handles constant, state-dependent and threshold-type delays, with explicit
breaking-point detection that restores the full order of the methods.
"""

from .core import (
    BreakingPoint,
    ClampedStateDependent,
    Constant,
    DdeProblem,
    DenseSolution,
    HistoryFunction,
    HistoryPiece,
    StateDependent,
    Threshold,
    delayed_argument,
    evaluate_solution,
)
from .errors import (
    AdvanceDetected,
    BlowUp,
    ConfigError,
    DelayKitError,
    SolverError,
    UnsupportedModel,
)
from .fcrk import AdaptiveStep, BreakpointPolicy, FixedStep, GridSteps, integrate, take_step
from .models import CATALOG
from .tableaux import FCRK1, FCRK2, FCRK3, FCRK4, TABLEAUX, verify_order_conditions
from .threshold import ThresholdSpec, audit_problem, augment_problem

__version__ = "0.1.0"

__all__ = [
    "AdaptiveStep",
    "AdvanceDetected",
    "BlowUp",
    "BreakingPoint",
    "BreakpointPolicy",
    "CATALOG",
    "ClampedStateDependent",
    "ConfigError",
    "Constant",
    "DdeProblem",
    "DelayKitError",
    "DenseSolution",
    "FCRK1",
    "FCRK2",
    "FCRK3",
    "FCRK4",
    "FixedStep",
    "GridSteps",
    "HistoryFunction",
    "HistoryPiece",
    "SolverError",
    "StateDependent",
    "TABLEAUX",
    "Threshold",
    "ThresholdSpec",
    "UnsupportedModel",
    "audit_problem",
    "augment_problem",
    "delayed_argument",
    "evaluate_solution",
    "integrate",
    "take_step",
    "verify_order_conditions",
]
