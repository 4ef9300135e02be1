"""Entropy along the heat flow: L log L regularization, monotonicity, moment bounds."""
from typing import List

import numpy as np
from scipy.integrate import trapezoid

from ..functionals import (ball_volume, curvature_moments, fisher, normalized_entropy,
                           second_moment)
from ..group_core import as_points
from ..heat_engine import heat_evolve_series
from .base import CertReport, Scenario, format_case, make_report, resolve_curvature
from .contraction import heated_density, heated_entropy

ANCHOR_LLOGL = "Ent(H_t mu) <= (r^2 + int d^2(x, x0) dmu) / (2 I_-2(t)) - log m(B_r(x0))"
ANCHOR_MONOTONE = "Ent(H_t mu) <= Ent(H_s mu) for s <= t"
ANCHOR_MOMENT = "int d^2 dmu_t <= e^(4t) (Ent(mu) + 2 int d^2 dmu)"
ANCHOR_FISHER = ("int_0^T F(f_t) dt + 2 int_0^T int d^2 dmu_t dt"
                 " <= 2 e^(4T) (Ent(mu) + 2 int d^2 dmu)")

RADIUS_FRACTIONS = (0.25, 0.5, 1.0)
FISHER_PANELS = 16


def certify_entropy_regularization(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    chart = scenario.chart
    metric = scenario.metric
    x0 = as_points(scenario.model, scenario.param("entropy_center", chart.center))
    radii = [f * chart.radius for f in scenario.param("radius_fractions", RADIUS_FRACTIONS)]
    volumes = {r: ball_volume(chart, r, x0, metric) for r in radii}
    times = [t for t in scenario.time_grid if t > 0]
    reports = []
    for name in sorted(scenario.measures):
        mu = scenario.measure(name)
        moment0 = second_moment(mu, x0, metric)
        start = normalized_entropy(mu, x0, metric) + 2.0 * moment0
        previous = (0.0, heated_entropy(scenario, name, 0.0))
        for t in times:
            ent_t = heated_entropy(scenario, name, t)
            i_minus = curvature_moments(c, -2.0, t)
            bounds = {r: (r * r + moment0) / (2.0 * i_minus) - np.log(volumes[r])
                      for r in radii if volumes[r] > 0}
            best_r = min(bounds, key=bounds.get)
            reports.append(make_report(
                "llogl_regularization", ANCHOR_LLOGL, format_case(name, ("t", t)),
                ent_t, bounds[best_r], tol.integral_rel, tol.noise_floor, t=t,
                metadata={"r": best_r, "ball_volume": volumes[best_r], "I_-2": i_minus}))
            reports.append(make_report(
                "entropy_monotone", ANCHOR_MONOTONE,
                format_case(name, ("s", previous[0]), ("t", t)), ent_t, previous[1],
                tol.integral_rel, tol.noise_floor, t=t, s=previous[0]))
            previous = (t, ent_t)
            moment_t = second_moment(heated_density(scenario, name, t), x0, metric)
            reports.append(make_report(
                "second_moment", ANCHOR_MOMENT, format_case(name, ("t", t)),
                moment_t, float(np.exp(4.0 * t)) * start, tol.integral_rel, tol.noise_floor,
                t=t, metadata={"initial_moment": moment0}))
        if times:
            reports.append(_fisher_moment_report(scenario, name, max(times), x0, start))
    return reports


def _fisher_moment_report(scenario: Scenario, name: str, horizon: float, x0, start: float):
    tol = scenario.tolerances
    op = scenario.operator
    grid = [horizon * k / FISHER_PANELS for k in range(FISHER_PANELS + 1)]
    flow = heat_evolve_series(op, scenario.measure(name), grid)
    fvals = [fisher(op, f) for f in flow]
    moments = [second_moment(f, x0, scenario.metric) for f in flow]
    lhs = float(trapezoid(fvals, grid)) + 2.0 * float(trapezoid(moments, grid))
    rhs = 2.0 * float(np.exp(4.0 * horizon)) * start
    return make_report("fisher_moment", ANCHOR_FISHER, format_case(name, ("T", horizon)),
                       lhs, rhs, tol.integral_rel, tol.noise_floor, t=horizon,
                       metadata={"fisher_integral": float(trapezoid(fvals, grid))})
