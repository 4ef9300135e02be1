"""Log-Harnack inequality, kernel lower bound and kernel symmetry."""
from typing import List, Tuple

import numpy as np

from ..errors import UnsupportedScenarioError
from ..functionals import curvature_moments
from ..group_core import identity
from ..heat_engine import heat_evolve, heat_kernel
from ..types import GridChart, ScalarField
from .base import (CertReport, Scenario, degenerate_report, format_case, make_report,
                   pointwise_report, resolve_curvature)

ANCHOR_HARNACK = "P_t log(f + eps)(y) <= log(P_t f(x) + eps) + d(x, y)^2 / (4 I_-2(t))"
ANCHOR_KERNEL = "p_2t[o](x) >= exp(-d(x, o)^2 / (4 I_-2(t)))"
ANCHOR_ORACLE = "discrete kernel matches the theta series"
ANCHOR_SYMMETRY = "p_t[x](y) = p_t[y](x)"

DEFAULT_PAIRS = 20
DEFAULT_ORACLE_REL = 1e-2


def sample_pairs(scenario: Scenario, count: int, radius: float) -> List[Tuple[int, int]]:
    """Window node pairs (x, y) with d(x, y) <= radius; the first pair has x = y."""
    rng = scenario.rng("log_harnack_pairs")
    nodes = np.flatnonzero(scenario.window.reshape(-1))
    points = scenario.chart.points()
    pairs = []
    for k in range(count):
        x = int(rng.choice(nodes))
        if k == 0:
            pairs.append((x, x))
            continue
        d = np.asarray(scenario.metric.distance(points[x], points[nodes]))
        near = nodes[(d <= radius) & (nodes != x)]
        y = int(rng.choice(near)) if near.size else x
        pairs.append((x, y))
    return pairs


def certify_log_harnack(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    op = scenario.operator
    points = scenario.chart.points()
    times = [t for t in scenario.param("harnack_times", scenario.time_grid) if t > 0]
    radius = float(scenario.param("pair_radius", 0.5))
    pairs = sample_pairs(scenario, int(scenario.param("pair_count", DEFAULT_PAIRS)), radius)
    dist = [float(scenario.metric.distance(points[x], points[y])) for x, y in pairs]
    reports = []
    for name in sorted(scenario.measures):
        f = scenario.measure(name)
        for t in times:
            i_minus = curvature_moments(c, -2.0, t)
            heated = heat_evolve(op, f, t).flat
            for eps in scenario.eps_list:
                logs = ScalarField(f.chart, np.log(f.values + eps))
                heated_log = heat_evolve(op, logs, t).flat
                for k, ((x, y), d) in enumerate(zip(pairs, dist)):
                    lhs = heated_log[y]
                    rhs = float(np.log(heated[x] + eps)) + d * d / (4.0 * i_minus)
                    reports.append(make_report(
                        "log_harnack", ANCHOR_HARNACK,
                        format_case(name, ("t", t), ("eps", float(eps)), ("pair", k)),
                        lhs, rhs, tol.integral_rel, tol.noise_floor,
                        window=scenario.window_label, t=t,
                        metadata={"x": x, "y": y, "d": d, "I_-2": i_minus}))
    return reports


def theta_kernel(chart: GridChart, t: float) -> np.ndarray:
    """Periodized Euclidean kernel of df/dt = Lf on the torus chart, centred at the origin."""
    periods = np.asarray(chart.model.periods)
    out = np.ones(chart.shape)
    for axis, (coords, length) in enumerate(zip(chart.axes(), periods)):
        images = int(np.ceil(np.sqrt(120.0 * t) / length)) + 1
        k = np.arange(-images, images + 1)
        shifted = coords[:, None] - k[None, :] * length
        line = np.sum(np.exp(-shifted ** 2 / (4.0 * t)), axis=1) / np.sqrt(4.0 * np.pi * t)
        view = [1] * len(chart.shape)
        view[axis] = -1
        out = out * line.reshape(view)
    return out


def _check_probability_space(scenario: Scenario) -> None:
    model = scenario.model
    if not model.is_torus:
        raise UnsupportedScenarioError(
            "kernel lower bound needs a probability reference measure (unit torus)")
    if abs(model.total_volume - 1.0) > 1e-12:
        raise UnsupportedScenarioError(
            f"torus volume is {model.total_volume:g}; the bound needs total measure 1")


def certify_kernel_lower_bound(scenario: Scenario) -> List[CertReport]:
    reports = []
    try:
        _check_probability_space(scenario)
    except UnsupportedScenarioError as e:
        reports.append(degenerate_report("kernel_lower_bound", ANCHOR_KERNEL, "precondition",
                                         str(e)))
    else:
        reports.extend(_kernel_bound_reports(scenario))
    reports.extend(_symmetry_reports(scenario))
    return reports


def _kernel_bound_reports(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    op = scenario.operator
    chart = scenario.chart
    origin = identity(scenario.model)
    d = np.asarray(scenario.metric.distance(origin, chart.nodes()))
    oracle_rel = float(scenario.param("kernel_oracle_rel", DEFAULT_ORACLE_REL))
    reports = []
    for t in [t for t in scenario.param("kernel_times", scenario.time_grid) if t > 0]:
        i_minus = curvature_moments(c, -2.0, t)
        kernel = heat_kernel(op, origin, 2.0 * t).values
        bound = np.exp(-d * d / (4.0 * i_minus))
        reports.append(pointwise_report(
            "kernel_lower_bound", ANCHOR_KERNEL, format_case(("t", t)), bound, kernel, None,
            tol.pointwise_rel, tol.noise_floor, window="full", t=t,
            metadata={"I_-2": i_minus}))
        exact = theta_kernel(chart, 2.0 * t)
        err = float(np.max(np.abs(kernel - exact)) / np.max(exact))
        reports.append(make_report(
            "kernel_oracle", ANCHOR_ORACLE, format_case(("t", t)), err, oracle_rel, 0.0,
            window="full", t=t, metadata={"min_kernel": float(kernel.min())}))
    return reports


def _symmetry_reports(scenario: Scenario) -> List[CertReport]:
    op = scenario.operator
    points = scenario.chart.points()
    t = float(scenario.param("symmetry_time", [t for t in scenario.time_grid if t > 0][0]))
    radius = float(scenario.param("pair_radius", 0.5))
    rng = scenario.rng("kernel_symmetry")
    nodes = np.flatnonzero(scenario.window.reshape(-1))
    reports = []
    for k in range(int(scenario.param("symmetry_pairs", 2))):
        x = int(rng.choice(nodes))
        d = np.asarray(scenario.metric.distance(points[x], points[nodes]))
        near = nodes[(d <= radius) & (nodes != x)]
        y = int(rng.choice(near)) if near.size else x
        pxy = heat_kernel(op, points[x], t).flat[y]
        pyx = heat_kernel(op, points[y], t).flat[x]
        scale = max(abs(pxy), abs(pyx))
        reports.append(make_report(
            "kernel_symmetry", ANCHOR_SYMMETRY, format_case(("pair", k)),
            abs(pxy - pyx), 1e-6 * scale, 0.0, scenario.tolerances.noise_floor,
            window=scenario.window_label, t=t,
            metadata={"x": x, "y": y, "p_xy": float(pxy), "p_yx": float(pyx)}))
    return reports
