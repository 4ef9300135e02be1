"""Calculus self-checks that must pass before any inequality is certified.

- differentiation formula: dA/ds = B for A(s) = 1/2 int (P_{t-s} f)^2 P_s phi
  and B(s) = int Gamma(P_{t-s} f) P_s phi
- chain rules for L and Gamma, second order under refinement
- L(h^eps f) = -(1/eps) int P_{eps r} f kappa'(r) dr
"""
from typing import Callable, List, Tuple

import numpy as np

from ..heat_engine import (carre_du_champ, heat_evolve, mollifier_laplacian_identity,
                           sublaplacian_apply)
from ..memory import get_heat_operator
from ..types import GridChart, ScalarField
from .base import CertReport, Scenario, format_case, make_report

NAME = "calculus_self_checks"
ANCHOR_DIFF = "d/ds 1/2 int (P_{t-s} f)^2 P_s phi = int Gamma(P_{t-s} f) P_s phi"
ANCHOR_LAPLACIAN = "L(phi(f)) = phi'(f) Lf + phi''(f) Gamma(f)"
ANCHOR_GAMMA = "Gamma(phi(f)) = phi'(f)^2 Gamma(f)"
ANCHOR_MOLLIFIER = "L(h^eps f) = -(1/eps) int P_{eps r} f kappa'(r) dr"

DIFF_REL = 2e-2
REFINEMENT_RATIO = 4.0
REFINEMENT_TOL = 0.35
MOLLIFIER_EPS = 0.1


def smooth_field(chart: GridChart) -> ScalarField:
    """A smooth bump (a trigonometric sum on the torus) sized to the chart."""
    nodes = chart.nodes()
    if chart.model.is_torus:
        periods = np.asarray(chart.model.periods)
        vals = np.sum(np.cos(2.0 * np.pi * nodes / periods), axis=-1)
        return ScalarField(chart, 0.5 + 0.25 * vals)
    width = 0.25 * (np.asarray(chart.hi) - np.asarray(chart.lo))
    diff = (nodes - chart.center) / width
    return ScalarField(chart, np.exp(-np.sum(diff * diff, axis=-1)))


def _phi_bump(chart: GridChart) -> ScalarField:
    base = smooth_field(chart)
    return base.with_values(1.0 + base.values)


def _action_pair(scenario: Scenario, t: float, s: float, dt: float) -> Tuple[float, float]:
    op = scenario.operator
    f = smooth_field(scenario.chart)
    phi = _phi_bump(scenario.chart)
    vol = scenario.chart.cell_volume
    ft = heat_evolve(op, f, t - s, dt)
    ps = heat_evolve(op, phi, s, dt)
    a = 0.5 * float(np.sum(ft.values ** 2 * ps.values)) * vol
    gamma = carre_du_champ(op, ft, scheme="generator")
    b = float(np.sum(gamma.values * ps.values)) * vol
    return a, b


def differentiation_reports(scenario: Scenario) -> List[CertReport]:
    t = float(scenario.param("action_time", 0.2))
    ds = float(scenario.param("action_ds", 0.01))
    dt = min(scenario.operator.stability_dt, ds / 4.0)
    reports = []
    for s in (0.25 * t, 0.5 * t):
        a_plus, _ = _action_pair(scenario, t, s + ds, dt)
        a_minus, _ = _action_pair(scenario, t, s - ds, dt)
        _, b = _action_pair(scenario, t, s, dt)
        slope = (a_plus - a_minus) / (2.0 * ds)
        reports.append(make_report(
            NAME, ANCHOR_DIFF, format_case("action", ("t", t), ("s", s)), abs(slope - b),
            DIFF_REL * abs(b), 0.0, scenario.tolerances.noise_floor, t=t, s=s,
            metadata={"dA/ds": slope, "B": b, "ds": ds}))
    return reports


def _laplacian_residual(chart: GridChart) -> np.ndarray:
    op = get_heat_operator(chart)
    f = smooth_field(chart)
    lf = sublaplacian_apply(op, f).values
    gamma = carre_du_champ(op, f, scheme="centered").values
    lhs = sublaplacian_apply(op, f.with_values(f.values ** 2)).values
    return lhs - 2.0 * f.values * lf - 2.0 * gamma


def _gamma_residual(chart: GridChart) -> np.ndarray:
    op = get_heat_operator(chart)
    f = smooth_field(chart)
    lhs = carre_du_champ(op, f.with_values(np.sin(f.values)), scheme="centered").values
    rhs = np.cos(f.values) ** 2 * carre_du_champ(op, f, scheme="centered").values
    return lhs - rhs


def _sup_on_window(chart: GridChart, residual: np.ndarray, fraction: float) -> float:
    return float(np.max(np.abs(residual[chart.window_mask(fraction)])))


def refinement_report(scenario: Scenario, label: str, anchor: str,
                      residual: Callable[[GridChart], np.ndarray]) -> CertReport:
    """Residual ratio coarse / fine, expected near 4 for a second-order identity."""
    fine = scenario.chart
    coarse = fine.coarsened(2)
    fraction = scenario.window_fraction
    r_fine = _sup_on_window(fine, residual(fine), fraction)
    r_coarse = _sup_on_window(coarse, residual(coarse), fraction)
    ratio = r_coarse / r_fine if r_fine > 0 else float("inf")
    tol = float(scenario.param("refinement_tol", REFINEMENT_TOL))
    return make_report(
        NAME, anchor, format_case(label, "refinement"), abs(ratio - REFINEMENT_RATIO),
        tol * REFINEMENT_RATIO, 0.0, scenario.tolerances.noise_floor,
        window=scenario.window_label,
        metadata={"ratio": ratio, "residual_fine": r_fine, "residual_coarse": r_coarse})


def mollifier_report(scenario: Scenario) -> CertReport:
    op = scenario.operator
    eps = float(scenario.param("mollifier_eps", MOLLIFIER_EPS))
    lhs, rhs = mollifier_laplacian_identity(op, smooth_field(scenario.chart), eps)
    mask = scenario.window
    err = float(np.max(np.abs(lhs - rhs)[mask]))
    scale = float(np.max(np.abs(rhs)[mask]))
    return make_report(
        NAME, ANCHOR_MOLLIFIER, format_case("mollifier", ("eps", eps)), err,
        scenario.tolerances.pointwise_rel * scale, 0.0, scenario.tolerances.noise_floor,
        window=scenario.window_label, metadata={"scale": scale})


def calculus_self_checks(scenario: Scenario) -> List[CertReport]:
    reports = differentiation_reports(scenario)
    reports.append(refinement_report(scenario, "laplacian_chain", ANCHOR_LAPLACIAN,
                                     _laplacian_residual))
    reports.append(refinement_report(scenario, "gamma_chain", ANCHOR_GAMMA, _gamma_residual))
    reports.append(mollifier_report(scenario))
    return reports
