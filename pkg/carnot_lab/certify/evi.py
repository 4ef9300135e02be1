"""Weak EVI and heated displacement convexity of the entropy.

Both inequalities are driven by RI(t0, t1), the mean of c^-2 along
[t0, t1]. On abelian models the geodesic is the displacement
interpolation of an exact plan; on H^1 it is the right-translation curve
mu_s = (T_s)# mu_0, T_s(x) = x.(s u), which is an optimal transport path.
"""
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import InvalidInputError
from ..functionals import (CurvatureFn, CurvatureKind, defect_w, entropy, fisher,
                           heated_coefficient_B, mean_RI, sigma_bound, sigma_defect)
from ..group_core import as_points
from ..heat_engine import dual_heat_on_measure, push_forward_density, stays_on_chart
from ..memory import get_result_store
from ..transport import (LP_CAP, cloud_to_density, common_block_factor, density_to_cloud,
                         displacement_interpolate, push_forward, w2_exact)
from ..types import DensityField
from ..utils import debug_log
from .base import (CertReport, Scenario, degenerate_report, format_case, make_report,
                   resolve_curvature)
from .contraction import cloud_factor, contraction_times, heated_entropy, heated_w2

ANCHOR_EVI = ("1/2 W_2^2(H_t1 mu_1, H_t0 mu_0) - W_2^2(mu_1, mu_0) / (2 RI(t0, t1))"
              " <= (t1 - t0) (Ent(H_t0 mu_0) - Ent(H_t1 mu_1))")
ANCHOR_EVI_DIAGONAL = "W_2(H_t mu_1, H_t mu_0) <= RI(t, t)^(-1/2) W_2(mu_1, mu_0)"
ANCHOR_HEATED = ("Ent(H_{t+h} mu_s) <= (1-s) Ent(H_t mu_0) + s Ent(H_t mu_1)"
                 " + s(1-s)/(2h) (W_2^2(mu_0, mu_1) / RI(t, t+h) - W_2^2(H_t mu_0, H_t mu_1))")
ANCHOR_TRANSLATION = "W_2(mu_0, (T_1)# mu_0) = d(u, o)"
ANCHOR_CONSTANT = "Ent((T_s)# mu_0) = Ent(mu_0)"
ANCHOR_WEAK = "Ent(mu_s) <= (1-s) Ent(mu_0) + s Ent(mu_1) + w(s)"
ANCHOR_SIGMA = "sigma(s) <= d(u, o) sqrt(2 s (1-s) (C^2 - 1) F~(f_0))"

ENTROPY_DRIFT = 1e-8
TRANSLATION_LOSS = 1e-6


def evi_time_pairs(scenario: Scenario) -> List[Tuple[float, float]]:
    """(t0, t1) pairs: the configured list, else one diagonal pair plus consecutive grid times."""
    configured = scenario.param("evi_times")
    if configured is not None:
        pairs = [(float(a), float(b)) for a, b in configured]
    else:
        times = contraction_times(scenario)
        positive = [t for t in times if t > 0]
        pairs = [(positive[0], positive[0])] if positive else []
        pairs += list(zip(times, times[1:]))
    for t0, t1 in pairs:
        if t0 < 0 or t1 < t0:
            raise InvalidInputError(f"EVI time pair ({t0}, {t1}) needs 0 <= t0 <= t1")
    return pairs


def certify_evi(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    reports = []
    for a, b in scenario.measure_pairs:
        w2_0 = heated_w2(scenario, (b, 0.0), (a, 0.0))
        for t0, t1 in evi_time_pairs(scenario):
            case = format_case(f"{a}~{b}", ("t0", t0), ("t1", t1))
            w2_t = heated_w2(scenario, (b, t1), (a, t0))
            if t0 == t1:
                # RI(t, t) = c(t)^-2: the contraction inequality itself
                reports.append(make_report(
                    "evi", ANCHOR_EVI_DIAGONAL, case, w2_t, float(c(t0)) * w2_0, tol.ot_rel,
                    tol.noise_floor, t=t0, metadata={"RI": float(c(t0)) ** -2}))
                continue
            ri = mean_RI(c, t0, t1)
            lhs = 0.5 * w2_t * w2_t - w2_0 * w2_0 / (2.0 * ri)
            rhs = (t1 - t0) * (heated_entropy(scenario, a, t0) - heated_entropy(scenario, b, t1))
            reports.append(make_report(
                "evi", ANCHOR_EVI, case, lhs, rhs, tol.ot_rel, tol.noise_floor, t=t0,
                metadata={"RI": ri, "t1": t1, "w2": w2_t, "w2_initial": w2_0}))
    return reports


# --- heated displacement convexity -----------------------------------------

def _heated_times(scenario: Scenario) -> List[float]:
    positive = [t for t in scenario.time_grid if t > 0]
    default = [0.0] + positive[:1]
    return sorted({float(t) for t in scenario.param("heated_times", default)})


def _entropy_after(scenario: Scenario, key: Tuple, mu: DensityField, t: float) -> float:
    def compute() -> float:
        heated = mu if t == 0 else dual_heat_on_measure(scenario.operator, mu, t)
        return entropy(heated).value

    return get_result_store().get_or_compute(("convexity_ent", scenario.fingerprint, key, t),
                                             compute)


def _w2_after(scenario: Scenario, key: Tuple, mu0: DensityField, mu1: DensityField,
              t: float, factor: int = 1) -> float:
    cap = scenario.param("lp_cap", LP_CAP)
    atoms = scenario.param("max_atoms", cap)

    def compute() -> float:
        op = scenario.operator
        heated = [dual_heat_on_measure(op, mu0, t), dual_heat_on_measure(op, mu1, t)]
        k = max(factor, common_block_factor(heated, atoms))
        a, b = (density_to_cloud(h, factor=k) for h in heated)
        return w2_exact(scenario.metric, a, b, cap=cap).distance

    return get_result_store().get_or_compute(("convexity_w2", scenario.fingerprint, key, t),
                                             compute)


def _convexity_reports(scenario: Scenario, c: CurvatureFn, label: str,
                       curve: Dict[float, DensityField], w2_0: float,
                       factor: int = 1) -> List[CertReport]:
    """Heated convexity for every (t, h, s) along a geodesic sampled at curve[s].

    Heated W_2 values use clouds coarsened at least as much as `factor`,
    the block factor behind w2_0.
    """
    tol = scenario.tolerances
    mu0, mu1 = curve[0.0], curve[1.0]
    reports = []
    for t in _heated_times(scenario):
        ent0 = _entropy_after(scenario, (label, 0.0), mu0, t)
        ent1 = _entropy_after(scenario, (label, 1.0), mu1, t)
        w2_t = w2_0 if t == 0 else _w2_after(scenario, (label,), mu0, mu1, t, factor)
        for h in scenario.h_grid:
            case_th = (("t", float(t)), ("h", float(h)))
            if t + h > c.t_max + 1e-12:
                for s in scenario.s_grid:
                    reports.append(degenerate_report(
                        "heated_convexity", ANCHOR_HEATED,
                        format_case(label, *case_th, ("s", float(s))),
                        f"t + h = {t + h:g} lies beyond the curvature table (t_max={c.t_max:g})",
                        t=t, s=s, h=h))
                continue
            ri = mean_RI(c, t, t + h)
            defect = w2_0 * w2_0 / ri - w2_t * w2_t
            meta = {"RI": ri}
            if t == 0:
                meta["B"] = heated_coefficient_B(c, h)
            for s in scenario.s_grid:
                lhs = _entropy_after(scenario, (label, float(s)), curve[float(s)], t + h)
                rhs = (1.0 - s) * ent0 + s * ent1 + s * (1.0 - s) / (2.0 * h) * defect
                reports.append(make_report(
                    "heated_convexity", ANCHOR_HEATED,
                    format_case(label, *case_th, ("s", float(s))), lhs, rhs, tol.integral_rel,
                    tol.noise_floor, t=t, s=s, h=h, metadata=dict(meta)))
    return reports


def _abelian_geodesic(scenario: Scenario, a: str, b: str):
    chart = scenario.chart
    cap = scenario.param("lp_cap", LP_CAP)
    ends = [scenario.measure(a), scenario.measure(b)]
    factor = max(cloud_factor(scenario),
                 common_block_factor(ends, scenario.param("max_atoms", cap)))
    source, target = (density_to_cloud(mu, factor=factor) for mu in ends)
    plan = w2_exact(scenario.metric, source, target, cap=cap)
    s_all = sorted({0.0, 1.0, *(float(s) for s in scenario.s_grid)})
    curve = {s: cloud_to_density(chart, displacement_interpolate(scenario.metric, plan, s))
             for s in s_all}
    debug_log(f"{scenario.name}: displacement geodesic {a}~{b} with {plan.source.size} atoms "
              f"(block factor {factor})")
    return curve, plan.distance, factor


def translation_offset(scenario: Scenario, u: np.ndarray, s: float) -> Tuple[int, ...]:
    """Lattice offset of s.u; only horizontal multiples of the spacing are allowed."""
    if u[2] != 0.0:
        raise InvalidInputError("right-translation geodesics need a horizontal point (u_z = 0)")
    h = scenario.chart.spacing[0]
    steps = np.array([s * u[0] / h, s * u[1] / h])
    rounded = np.round(steps)
    if np.any(np.abs(steps - rounded) > 1e-9):
        raise InvalidInputError(f"s*u = {s * u[:2]} is not a lattice point of spacing {h:g}")
    return int(rounded[0]), int(rounded[1]), 0


def _curvature_constant(c: CurvatureFn) -> float:
    if c.kind == CurvatureKind.TABULATED:
        return float(max(c.values))
    return c.C


def trimmed_measure(scenario: Scenario, mu: DensityField,
                    offsets: Sequence[Tuple[int, ...]]) -> Tuple[DensityField, float]:
    """mu restricted to the nodes kept on the chart by every offset, renormalized.

    Returns the trimmed density and the fraction of mass removed; the
    fraction may not exceed the `translation_loss` parameter.
    """
    limit = float(scenario.param("translation_loss", TRANSLATION_LOSS))
    keep = stays_on_chart(mu.chart, offsets, side="right")
    kept = DensityField(mu.chart, np.where(keep, mu.values, 0.0))
    removed = 1.0 - kept.mass / mu.mass
    if removed > limit:
        raise InvalidInputError(f"right translation pushes a mass fraction {removed:.3g} off the "
                                f"chart (translation_loss = {limit:g})")
    if removed > 0:
        debug_log(f"{scenario.name}: trimmed mass fraction {removed:.3g} before translating")
    return kept.normalized(), max(removed, 0.0)


def convexity_source(scenario: Scenario) -> Tuple[str, DensityField]:
    """The measure translated along u: a measure name, or a {name, center, width} bump table."""
    entry = scenario.param("convexity_measure", sorted(scenario.measures)[0])
    if isinstance(entry, str):
        return entry, scenario.measure(entry)
    if not isinstance(entry, dict) or "center" not in entry:
        raise InvalidInputError("convexity_measure needs a measure name or a {center, width} table")
    # Import here to avoid circular imports
    from ..scenarios.factories import gaussian_density
    center = [float(v) for v in entry["center"]]
    width = float(entry.get("width", 1.0))
    return str(entry.get("name", "convexity_bump")), gaussian_density(scenario.chart, center, width)


def _heisenberg_reports(scenario: Scenario, c: CurvatureFn) -> List[CertReport]:
    tol = scenario.tolerances
    model = scenario.model
    op = scenario.operator
    name, source = convexity_source(scenario)
    u = as_points(model, scenario.param("convexity_u", (1.0, 0.0, 0.0)))
    s_all = sorted({0.0, 1.0, *(float(s) for s in scenario.s_grid)})
    offsets = {s: translation_offset(scenario, u, s) for s in s_all}
    mu0, removed = trimmed_measure(scenario, source, list(offsets.values()))
    curve = {s: push_forward_density(mu0, offsets[s], side="right") for s in s_all}

    cap = scenario.param("lp_cap", LP_CAP)
    cloud = density_to_cloud(mu0, max_atoms=scenario.param("max_atoms", cap))
    moved = push_forward(model, cloud, u, side="right")
    w2 = w2_exact(scenario.metric, cloud, moved, cap=cap).distance
    du = float(scenario.metric.distance(np.zeros(3), u))
    label = f"{name}/translation"
    reports = [make_report(
        "heated_convexity", ANCHOR_TRANSLATION, format_case(label, "w2"), abs(w2 - du),
        tol.ot_rel * du, 0.0, tol.noise_floor,
        metadata={"w2": w2, "d_u": du, "trimmed": removed})]

    entropies = {s: entropy(curve[s]).value for s in s_all}
    drift = max(abs(e - entropies[0.0]) for e in entropies.values())
    reports.append(make_report(
        "heated_convexity", ANCHOR_CONSTANT, format_case(label, "entropy"), drift, ENTROPY_DRIFT,
        0.0, tol.noise_floor, metadata={"entropy": entropies[0.0]}))

    big_c = _curvature_constant(c)
    right_fisher = fisher(op, mu0, right_invariant=True)
    for s in scenario.s_grid:
        s = float(s)
        w_s = defect_w(s)
        bound = sigma_bound(op, s, u, mu0, big_c, scenario.metric)
        sigma, best_h = sigma_defect(op, curve[s], w2, s, big_c, scenario.h_grid,
                                     fisher_bound=right_fisher)
        reports.append(make_report(
            "heated_convexity", ANCHOR_WEAK, format_case(label, "weak", ("s", s)), entropies[s],
            (1.0 - s) * entropies[0.0] + s * entropies[1.0] + w_s, tol.integral_rel,
            tol.noise_floor, s=s, metadata={"w": w_s, "C": big_c}))
        reports.append(make_report(
            "heated_convexity", ANCHOR_SIGMA, format_case(label, "sigma", ("s", s)), sigma,
            bound, tol.integral_rel, tol.noise_floor, s=s, h=best_h,
            metadata={"C": big_c, "right_fisher": right_fisher, "w2": w2}))
    reports.extend(_convexity_reports(scenario, c, label, curve, w2))
    return reports


def certify_heated_convexity(scenario: Scenario) -> List[CertReport]:
    c = resolve_curvature(scenario)
    if scenario.model.is_heisenberg:
        return _heisenberg_reports(scenario, c)
    reports = []
    for a, b in scenario.measure_pairs:
        curve, w2_0, factor = _abelian_geodesic(scenario, a, b)
        reports.extend(_convexity_reports(scenario, c, f"{a}~{b}", curve, w2_0, factor))
    return reports
