"""Poincare sandwich, Lipschitz propagation and the strong Feller bound."""
from typing import List

import numpy as np

from ..functionals import curvature_moments, lip_estimate
from ..heat_engine import carre_du_champ, heat_evolve_series
from ..types import ScalarField
from .base import (CertReport, Scenario, format_case, make_report, pointwise_report,
                   resolve_curvature)

ANCHOR_LOWER = "2 I_-2(t) Gamma(P_t f) <= P_t(f^2) - (P_t f)^2"
ANCHOR_UPPER = "P_t(f^2) - (P_t f)^2 <= 2 I_2(t) P_t Gamma(f)"
ANCHOR_LIP = "Lip(P_t f) <= c(t) Lip(f)"
ANCHOR_FELLER = "sqrt(2 I_-2(t)) Lip(P_t f) <= sup |f|"


def certify_variance_poincare(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    op = scenario.operator
    chart = scenario.chart
    window = scenario.window
    label = scenario.window_label
    times = [t for t in scenario.time_grid if t > 0]
    reports = []
    for witness in scenario.test_functions:
        f = witness.on_chart(chart)
        squares = ScalarField(chart, f.values ** 2)
        gamma0 = carre_du_champ(op, f, scheme="generator")
        flow = heat_evolve_series(op, f, times)
        flow_sq = heat_evolve_series(op, squares, times)
        flow_gamma = heat_evolve_series(op, gamma0, times)
        lip_f = lip_estimate(f, scenario.metric)
        sup_f = float(np.max(np.abs(f.values)))
        for t, ft, sq, pg in zip(times, flow, flow_sq, flow_gamma):
            i_minus = curvature_moments(c, -2.0, t)
            i_plus = curvature_moments(c, 2.0, t)
            variance = sq.values - ft.values ** 2
            gamma_t = carre_du_champ(op, ft, scheme="generator").values
            meta = {"I_-2": i_minus, "I_2": i_plus}
            reports.append(pointwise_report(
                "poincare_lower", ANCHOR_LOWER, format_case(witness.name, ("t", t)),
                2.0 * i_minus * gamma_t, variance, window, tol.pointwise_rel, tol.noise_floor,
                window=label, t=t, metadata=dict(meta)))
            reports.append(pointwise_report(
                "poincare_upper", ANCHOR_UPPER, format_case(witness.name, ("t", t)),
                variance, 2.0 * i_plus * pg.values, window, tol.pointwise_rel,
                tol.noise_floor, window=label, t=t, metadata=dict(meta)))
            lip_t = lip_estimate(ft, scenario.metric, window)
            reports.append(make_report(
                "lip_propagation", ANCHOR_LIP, format_case(witness.name, ("t", t)),
                lip_t, float(c(t)) * lip_f, tol.pointwise_rel, tol.noise_floor,
                window=label, t=t, metadata={"lip_f": lip_f}))
            reports.append(make_report(
                "strong_feller", ANCHOR_FELLER, format_case(witness.name, ("t", t)),
                float(np.sqrt(2.0 * i_minus)) * lip_t, sup_f, tol.pointwise_rel,
                tol.noise_floor, window=label, t=t, metadata={"I_-2": i_minus}))
    return reports
