"""Wasserstein contraction of the dual heat flow, W_p(H_t mu, H_t nu) <= c(t) W_p(mu, nu).

The heated densities, their point clouds and the W_2 distances between
them are memoized per scenario; the EVI certifier reads the same values.
All clouds of a scenario are coarsened with one block factor.
"""
from typing import List, Tuple

from ..functionals import entropy
from ..heat_engine import dual_heat_on_measure
from ..memory import get_result_store
from ..transport import LP_CAP, common_block_factor, density_to_cloud, w1_dual, w2_exact
from ..types import DensityField, PointCloudMeasure
from ..utils import debug_log
from .base import CertReport, Scenario, format_case, make_report, resolve_curvature

NAME_W2 = "w2_contraction"
NAME_W1 = "w1_contraction"
ANCHOR_W2 = "W_2(H_t mu, H_t nu) <= c(t) W_2(mu, nu)"
ANCHOR_W1 = "W_1(H_t mu, H_t nu) <= c(t) W_1(mu, nu)"


def heated_density(scenario: Scenario, name: str, t: float) -> DensityField:
    key = ("heated", scenario.fingerprint, name, float(t))
    return get_result_store().get_or_compute(
        key, lambda: dual_heat_on_measure(scenario.operator, scenario.measure(name), float(t)))


def heated_entropy(scenario: Scenario, name: str, t: float) -> float:
    key = ("entropy", scenario.fingerprint, name, float(t))
    return get_result_store().get_or_compute(
        key, lambda: entropy(heated_density(scenario, name, t)).value)


def cloud_times(scenario: Scenario) -> List[float]:
    """Every heating time whose cloud enters a W_p comparison."""
    extra = [float(t) for pair in scenario.param("evi_times", ()) for t in pair]
    return sorted({*contraction_times(scenario), *extra})


def cloud_factor(scenario: Scenario) -> int:
    """Block factor shared by the clouds of all paired measures at all cloud times."""
    def compute() -> int:
        names = sorted({n for pair in scenario.measure_pairs for n in pair})
        fields = [heated_density(scenario, n, t) for n in names for t in cloud_times(scenario)]
        if not fields:
            return 1
        factor = common_block_factor(fields, scenario.param("max_atoms", LP_CAP))
        debug_log(f"{scenario.name}: shared block factor {factor} over {len(fields)} densities")
        return factor

    return get_result_store().get_or_compute(("cloud_factor", scenario.fingerprint), compute)


def heated_cloud(scenario: Scenario, name: str, t: float) -> PointCloudMeasure:
    key = ("cloud", scenario.fingerprint, name, float(t))
    return get_result_store().get_or_compute(
        key, lambda: density_to_cloud(heated_density(scenario, name, t),
                                      factor=cloud_factor(scenario)))


def _canonical(a: Tuple[str, float], b: Tuple[str, float]):
    return (a, b) if a <= b else (b, a)


def heated_w2(scenario: Scenario, a: Tuple[str, float], b: Tuple[str, float]) -> float:
    """W_2(H_ta mu_a, H_tb mu_b); symmetric in its arguments by construction."""
    a, b = _canonical((a[0], float(a[1])), (b[0], float(b[1])))
    cap = scenario.param("lp_cap", LP_CAP)

    def compute() -> float:
        plan = w2_exact(scenario.metric, heated_cloud(scenario, *a), heated_cloud(scenario, *b),
                        cap=cap)
        return plan.distance

    return get_result_store().get_or_compute(("w2", scenario.fingerprint, a, b), compute)


def heated_w1(scenario: Scenario, a: Tuple[str, float], b: Tuple[str, float]) -> float:
    a, b = _canonical((a[0], float(a[1])), (b[0], float(b[1])))
    cap = scenario.param("lp_cap", LP_CAP)

    def compute() -> float:
        return w1_dual(scenario.metric, heated_cloud(scenario, *a), heated_cloud(scenario, *b),
                       cap=cap)

    return get_result_store().get_or_compute(("w1", scenario.fingerprint, a, b), compute)


def contraction_times(scenario: Scenario) -> List[float]:
    return sorted({0.0, *scenario.time_grid})


def certify_w_contraction(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    reports = []
    for a, b in scenario.measure_pairs:
        w2_0 = heated_w2(scenario, (a, 0.0), (b, 0.0))
        w1_0 = heated_w1(scenario, (a, 0.0), (b, 0.0))
        for t in contraction_times(scenario):
            ct = float(c(t))
            meta = {"c": ct, "atoms": [heated_cloud(scenario, a, t).size,
                                       heated_cloud(scenario, b, t).size]}
            case = format_case(f"{a}~{b}", ("t", t))
            reports.append(make_report(
                NAME_W2, ANCHOR_W2, case, heated_w2(scenario, (a, t), (b, t)), ct * w2_0,
                tol.ot_rel, tol.noise_floor, t=t, metadata=meta))
            reports.append(make_report(
                NAME_W1, ANCHOR_W1, case, heated_w1(scenario, (a, t), (b, t)), ct * w1_0,
                tol.ot_rel, tol.noise_floor, t=t, metadata=dict(meta)))
    return reports
