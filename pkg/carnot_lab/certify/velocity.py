"""Metric speed of curves of measures.

- heat flow: (W_2(mu_{t+h}, mu_t) / h)^2 <= F(f_t)
- ball convolution does not increase the speed of a curve
- |d/ds int phi dmu_s|^2 <= |mu'_s|^2 int Gamma(phi) dmu_s

The heat-flow distance is the W_2 of the horizontal axis marginals, exact
for product densities on a box and a lower bound otherwise.
"""
from typing import List

import numpy as np

from ..functionals import fisher
from ..group_core import as_points, multiply
from ..heat_engine import heat_evolve_series
from ..transport import (LP_CAP, ball_points, convolve_cloud, density_to_cloud, product_defect,
                         push_forward, right_translation_curve, w2_exact, w2_marginals)
from ..types import GroupModel, PointCloudMeasure
from ..utils import debug_log
from .base import (CertReport, Scenario, WitnessFunction, degenerate_report, format_case,
                   make_report)

ANCHOR_SPEED = "(W_2(mu_{t+h}, mu_t) / h)^2 <= F(f_t)"
ANCHOR_CONVOLUTION = "W_2(rho_r * mu_s, rho_r * mu_s') <= W_2(mu_s, mu_s')"
ANCHOR_LISINI = "|d/ds int phi dmu_s|^2 <= |mu'_s|^2 int Gamma(phi) dmu_s"

FRAME_STEP = 1e-5
PRODUCT_TOL = 1e-3
CONVOLUTION_OFFSETS = 4


def certify_heat_speed(scenario: Scenario) -> List[CertReport]:
    """Speed of the heat flow started at one of the scenario's measures."""
    name = scenario.param("velocity_measure", sorted(scenario.measures)[0])
    if scenario.model.is_torus:
        return [degenerate_report(
            "heat_speed", ANCHOR_SPEED, name,
            "axis-marginal transport needs a chart with walls")]
    tol = scenario.tolerances
    op = scenario.operator
    f0 = scenario.measure(name)
    times = [t for t in scenario.param("velocity_times", scenario.time_grid[:1]) if t > 0]
    ladder = sorted(scenario.param("velocity_h", (0.02, 0.01)), reverse=True)
    reports = []
    for t in times:
        grid = sorted({t, *(t + h for h in ladder)})
        flow = dict(zip(grid, heat_evolve_series(op, f0, grid)))
        info = fisher(op, flow[t])
        defect = None if scenario.model.is_heisenberg else product_defect(flow[t])
        exact = defect is not None and defect < PRODUCT_TOL
        for h in ladder:
            speed = w2_marginals(flow[t + h], flow[t]) / h
            reports.append(make_report(
                "heat_speed", ANCHOR_SPEED, format_case(name, ("t", t), ("h", h)),
                speed * speed, info, tol.ot_rel, tol.noise_floor, t=t, h=h,
                metadata={"exact": exact, "product_defect": defect}))
    return reports


def _curve(scenario: Scenario, atoms: int):
    model = scenario.model
    default_u = (1.0,) + (0.0,) * (model.dimension - 1)
    u = as_points(model, scenario.param("velocity_u", default_u))
    source = scenario.measure(sorted(scenario.measures)[0])
    mu0 = density_to_cloud(source, max_atoms=atoms)
    s_grid = sorted({0.0, 1.0, *scenario.s_grid})
    return u, s_grid, mu0, right_translation_curve(model, mu0, u, s_grid)


def kernel_sample(scenario: Scenario, radius: float) -> np.ndarray:
    """A seeded subset of the discrete ball; any probability kernel keeps the contraction."""
    ball = ball_points(scenario.model, radius, metric=scenario.metric)
    k = min(int(scenario.param("convolution_offsets", CONVOLUTION_OFFSETS)), ball.shape[0])
    pick = scenario.rng("convolution").choice(ball.shape[0], size=k, replace=False)
    return ball[np.sort(pick)]


def certify_convolution_speed(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    model = scenario.model
    cap = scenario.param("lp_cap", LP_CAP)
    radius = float(scenario.param("convolution_radius", 0.2))
    ball = kernel_sample(scenario, radius)
    count = ball.shape[0]
    u, s_grid, mu0, curve = _curve(scenario, max(1, cap // count))
    debug_log(f"{scenario.name}: convolution over {count} ball points, {mu0.size} base atoms")
    smoothed = [convolve_cloud(model, radius, mu, ball=ball) for mu in curve]
    reports = []
    for k in range(len(s_grid) - 1):
        s0, s1 = s_grid[k], s_grid[k + 1]
        raw = w2_exact(scenario.metric, curve[k], curve[k + 1], cap=cap).distance
        conv = w2_exact(scenario.metric, smoothed[k], smoothed[k + 1], cap=cap).distance
        reports.append(make_report(
            "convolution_speed", ANCHOR_CONVOLUTION, format_case(("s", s0), ("s1", s1)),
            conv, raw, tol.ot_rel, tol.noise_floor, s=s0,
            metadata={"radius": radius, "offsets": count, "atoms": mu0.size,
                      "u": u.tolist()}))
    return reports


def frame_gamma(model: GroupModel, phi: WitnessFunction, points: np.ndarray) -> np.ndarray:
    """sum_i (X_i phi)^2 with X_i phi(p) from group differences p.(+-eps e_i)."""
    total = np.zeros(points.shape[0])
    for i in range(model.horizontal_rank):
        step = np.zeros(model.dimension)
        step[i] = FRAME_STEP
        fwd = phi(multiply(model, points, step))
        bwd = phi(multiply(model, points, -step))
        total += ((fwd - bwd) / (2.0 * FRAME_STEP)) ** 2
    return total


def _integral(phi: WitnessFunction, mu: PointCloudMeasure) -> float:
    return float(np.dot(mu.weights, phi(mu.points)))


def certify_lisini(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    model = scenario.model
    cap = scenario.param("lp_cap", LP_CAP)
    u, s_grid, mu0, curve = _curve(scenario, scenario.param("max_atoms", cap))
    speeds = []
    for k in range(len(s_grid) - 1):
        delta = s_grid[k + 1] - s_grid[k]
        speeds.append(w2_exact(scenario.metric, curve[k], curve[k + 1], cap=cap).distance / delta)
    reports = []
    for phi in scenario.test_functions:
        for k in range(len(s_grid) - 1):
            s0, s1 = s_grid[k], s_grid[k + 1]
            delta = s1 - s0
            mid = push_forward(model, mu0, 0.5 * (s0 + s1) * u, side="right")
            rate = (_integral(phi, curve[k + 1]) - _integral(phi, curve[k])) / delta
            energy = float(np.dot(mid.weights, frame_gamma(model, phi, mid.points)))
            reports.append(make_report(
                "lisini", ANCHOR_LISINI, format_case(phi.name, ("s", s0), ("s1", s1)),
                rate * rate, speeds[k] ** 2 * energy, tol.ot_rel, tol.noise_floor, s=s0,
                metadata={"speed": speeds[k]}))
    return reports


def certify_velocity(scenario: Scenario) -> List[CertReport]:
    return (certify_heat_speed(scenario) + certify_convolution_speed(scenario)
            + certify_lisini(scenario))
