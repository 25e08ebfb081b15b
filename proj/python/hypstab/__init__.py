"""Finite-time boundary stabilization of 1-D hyperbolic systems.

Thin wrapper over the C++ core: scenario parsing, feedback synthesis,
closed-loop simulation, and the Lyapunov verification suite.
"""

from ._core import (
    CalibrationFailedError,
    NoConvergenceError,
    Scenario,
    SchemaError,
    SingularSubmatrixError,
    ValidationError,
    calibrate_gamma_for,
    check_class_b,
    parse_scenario,
    parse_scenario_text,
    run_acceptance,
    serialize_scenario,
    simulate_scenario,
    synthesize,
    timing,
    validate,
)

__all__ = [
    "CalibrationFailedError",
    "NoConvergenceError",
    "Scenario",
    "SchemaError",
    "SingularSubmatrixError",
    "ValidationError",
    "calibrate_gamma_for",
    "check_class_b",
    "parse_scenario",
    "parse_scenario_text",
    "run_acceptance",
    "serialize_scenario",
    "simulate_scenario",
    "synthesize",
    "timing",
    "validate",
]
