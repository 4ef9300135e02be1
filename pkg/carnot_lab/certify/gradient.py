"""Gradient contraction Gamma(P_t f) <= c(t)^2 P_t Gamma(f) and the c-hat estimate."""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..functionals import fit_exponential_bound
from ..heat_engine import carre_du_champ, heat_evolve_series
from ..memory import get_result_store
from ..utils import debug_log
from .base import (CertReport, Scenario, degenerate_report, format_case, make_report,
                   pointwise_report, resolve_curvature)

NAME = "gradient_contraction"
ANCHOR = "Gamma(P_t f) <= c(t)^2 P_t Gamma(f)"
SCHEMES = ("centered", "generator")
GATE = 1e-6
ANCHOR_LOWER = "c*(t) >= 1"
ANCHOR_WITNESS = "max_t c-hat(t) >= 1.02 on H^1"
C_HAT_NOISE = 1e-6
C_HAT_WITNESS = 1.02


@dataclass
class GammaCase:
    """Both sides of the gradient bound on the window for one (f, scheme, t)."""
    witness: str
    scheme: str
    t: float
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def ratio(self) -> float:
        """max lhs / rhs over nodes where rhs carries signal."""
        scale = float(np.max(np.abs(self.rhs), initial=0.0))
        live = self.rhs > GATE * scale
        if scale <= 0 or not live.any():
            return 0.0
        return float(np.max(self.lhs[live] / self.rhs[live]))


def gamma_table(scenario: Scenario) -> List[GammaCase]:
    """Gamma(P_t f) and P_t Gamma(f) for every witness, scheme and positive grid time."""
    def compute() -> List[GammaCase]:
        op = scenario.operator
        window = scenario.window.reshape(-1)
        times = [t for t in scenario.time_grid if t > 0]
        cases = []
        for witness in scenario.test_functions:
            f = witness.on_chart(scenario.chart)
            flow = heat_evolve_series(op, f, times)
            for scheme in SCHEMES:
                gamma0 = carre_du_champ(op, f, scheme=scheme)
                heated = heat_evolve_series(op, gamma0, times)
                for t, ft, pg in zip(times, flow, heated):
                    lhs = carre_du_champ(op, ft, scheme=scheme).flat[window]
                    cases.append(GammaCase(witness.name, scheme, t, lhs, pg.flat[window].copy()))
            debug_log(f"{scenario.name}: gamma table done for {witness.name}")
        return cases

    return get_result_store().get_or_compute(("gamma_table", scenario.fingerprint), compute)


def estimate_c_hat(scenario: Scenario) -> Dict[float, float]:
    """c-hat(t) = max over witnesses and schemes of sqrt(max Gamma(P_t f) / P_t Gamma(f))."""
    table: Dict[float, float] = {}
    for case in gamma_table(scenario):
        table[case.t] = max(table.get(case.t, 0.0), float(np.sqrt(max(case.ratio, 0.0))))
    return dict(sorted(table.items()))


def _grid_sums(times: List[float]) -> List[Tuple[float, float, float]]:
    out = []
    for i, s in enumerate(times):
        for t in times[i:]:
            for u in times:
                if abs(u - (s + t)) <= 1e-9 * max(u, 1.0):
                    out.append((s, t, u))
    return out


def certify_gradient_contraction(scenario: Scenario) -> List[CertReport]:
    tol = scenario.tolerances
    c = resolve_curvature(scenario)
    window = scenario.window_label
    reports = []
    for case in gamma_table(scenario):
        c2 = float(c(case.t)) ** 2
        reports.append(pointwise_report(
            NAME, ANCHOR, format_case(case.witness, case.scheme, ("t", case.t)),
            case.lhs, c2 * case.rhs, None, tol.pointwise_rel, tol.noise_floor, GATE,
            window=window, t=case.t))

    c_hat = estimate_c_hat(scenario)
    times = sorted(c_hat)
    live = [t for t in times if c_hat[t] > 0]
    if live:
        M, K = fit_exponential_bound(live, [c_hat[t] for t in live])
    else:
        M, K = 0.0, 0.0
    envelope = {"M": M, "K": K, "max_c_hat": max(c_hat.values(), default=0.0)}
    for t in times:
        case = format_case(("t", t))
        if scenario.model.is_torus:
            # no linear witness on a compact model, so c-hat may sit below 1
            reports.append(degenerate_report(
                "c_hat_lower_bound", ANCHOR_LOWER, case,
                "c-hat is only a lower bound for c* without a linear witness",
                window=window, t=t, metadata=dict(envelope, c_hat=c_hat[t])))
            continue
        reports.append(make_report(
            "c_hat_lower_bound", ANCHOR_LOWER, case, 1.0, c_hat[t], C_HAT_NOISE,
            tol.noise_floor, window=window, t=t, metadata=dict(envelope)))
    if scenario.model.is_heisenberg and times:
        witness = float(scenario.param("c_hat_witness", C_HAT_WITNESS))
        peak = max(times, key=lambda t: c_hat[t])
        reports.append(make_report(
            "c_hat_noncommutative", ANCHOR_WITNESS, format_case("max", ("t", peak)), witness,
            c_hat[peak], C_HAT_NOISE, tol.noise_floor, window=window, t=peak,
            metadata=dict(envelope)))
    for s, t, u in _grid_sums(times):
        reports.append(make_report(
            "c_hat_submultiplicative", "c*(s + t) <= c*(s) c*(t)",
            format_case(("s", s), ("t", t)), c_hat[u], c_hat[s] * c_hat[t],
            tol.submult_rel, tol.noise_floor, window=window, t=u, s=s))
    return reports
