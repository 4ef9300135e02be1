"""Certifier dispatch table.

This module exports the `dispatch` function that routes a certifier name
to its implementation in the specialized modules.
"""
from typing import Callable, Dict, List, Sequence

from ..errors import InvalidInputError, UnsupportedScenarioError
from ..utils import debug_log
from .base import (CertReport, Scenario, ToleranceSpec, Verdict, WitnessFunction,
                   degenerate_report, make_report, pointwise_report, resolve_curvature,
                   sorted_reports)
from .calculus import calculus_self_checks
from .contraction import certify_w_contraction
from .entropy import certify_entropy_regularization
from .evi import certify_evi, certify_heated_convexity
from .gradient import certify_gradient_contraction, estimate_c_hat
from .harnack import certify_kernel_lower_bound, certify_log_harnack
from .poincare import certify_variance_poincare
from .velocity import certify_velocity

Certifier = Callable[[Scenario], List[CertReport]]

# Complete certifier table, in scheduling order
CERTIFIERS: Dict[str, Certifier] = {
    "calculus_self_checks": calculus_self_checks,
    "gradient_contraction": certify_gradient_contraction,
    "w_contraction": certify_w_contraction,
    "variance_poincare": certify_variance_poincare,
    "log_harnack": certify_log_harnack,
    "kernel_lower_bound": certify_kernel_lower_bound,
    "entropy_regularization": certify_entropy_regularization,
    "velocity": certify_velocity,
    "evi": certify_evi,
    "heated_convexity": certify_heated_convexity,
}

PREREQUISITES = ("calculus_self_checks",)


def resolve_suite(names: Sequence[str] = ()) -> List[str]:
    """Requested certifier names in scheduling order; empty means all."""
    if not names:
        return list(CERTIFIERS)
    unknown = [n for n in names if n not in CERTIFIERS]
    if unknown:
        raise InvalidInputError(f"unknown certifier(s): {', '.join(unknown)}")
    return [n for n in CERTIFIERS if n in names]


def dispatch(name: str, scenario: Scenario) -> List[CertReport]:
    """Run one certifier; unmet preconditions become a degenerate report."""
    handler = CERTIFIERS.get(name)
    if handler is None:
        raise InvalidInputError(f"unknown certifier {name!r}")
    try:
        return handler(scenario)
    except UnsupportedScenarioError as e:
        debug_log(f"{name}: unsupported scenario: {e}")
        return [degenerate_report(name, "precondition", scenario.name, str(e))]


__all__ = [
    "CERTIFIERS", "PREREQUISITES", "CertReport", "Scenario", "ToleranceSpec", "Verdict",
    "WitnessFunction", "degenerate_report", "dispatch", "estimate_c_hat", "make_report",
    "pointwise_report", "resolve_curvature", "resolve_suite", "sorted_reports",
]
