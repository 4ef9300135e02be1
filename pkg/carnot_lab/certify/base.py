"""Base types for the certifiers.

- ToleranceSpec: relative tolerances per family of checks
- CertReport: one certified inequality instance
- WitnessFunction / Scenario: the read-only input shared by all certifiers
- make_report / pointwise_report: turn computed sides into verdicts
- error_report: the FAIL verdict of a certifier that raised
"""
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..cc_metric import CCMetric
from ..errors import InvalidInputError
from ..functionals import CurvatureFn
from ..memory import get_heat_operator, get_result_store
from ..types import DensityField, GridChart, GroupModel, ScalarField
from ..utils import debug_log


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ToleranceSpec:
    """Relative tolerances; a report passes when slack >= -tol * scale."""
    pointwise_rel: float = 5e-2
    integral_rel: float = 1e-2
    ot_rel: float = 2e-2
    submult_rel: float = 2e-2
    noise_floor: float = 1e-12

    def __post_init__(self):
        for name in ("pointwise_rel", "integral_rel", "ot_rel", "submult_rel"):
            value = getattr(self, name)
            if not 0.0 < value <= 0.2:
                raise InvalidInputError(f"tolerance {name}={value} must lie in (0, 0.2]")
        if not self.noise_floor > 0:
            raise InvalidInputError("noise_floor must be positive")


@dataclass
class CertReport:
    name: str
    anchor: str
    case: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    verdict: Verdict
    window: Optional[str] = None
    t: Optional[float] = None
    s: Optional[float] = None
    h: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def sort_key(self) -> Tuple[str, str]:
        return (self.name, self.case)

    def to_row(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "case": self.case,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "slack": float(self.slack),
            "tol": float(self.tolerance),
            "verdict": self.verdict.value,
            "window": self.window,
            "t": self.t,
            "s": self.s,
            "h": self.h,
            "extra": self.metadata,
        }


def decide(lhs: float, rhs: float, tol: float, floor: float) -> Tuple[float, Verdict]:
    """Slack rhs - lhs and its verdict against tol * max(|lhs|, |rhs|, floor)."""
    lhs, rhs = float(lhs), float(rhs)
    slack = rhs - lhs
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        return slack, Verdict.FAIL
    size = max(abs(lhs), abs(rhs))
    if size < floor:
        return slack, Verdict.DEGENERATE
    return slack, Verdict.PASS if slack >= -tol * max(size, floor) else Verdict.FAIL


def make_report(name: str, anchor: str, case: str, lhs: float, rhs: float, tol: float,
                floor: float = 1e-12, **fields) -> CertReport:
    """Build a report for the scalar inequality lhs <= rhs."""
    slack, verdict = decide(lhs, rhs, tol, floor)
    return CertReport(name, anchor, case, float(lhs), float(rhs), slack, float(tol), verdict,
                      **fields)


def degenerate_report(name: str, anchor: str, case: str, reason: str, **fields) -> CertReport:
    """A report for a check that cannot be evaluated on this scenario."""
    meta = dict(fields.pop("metadata", {}))
    meta["reason"] = reason
    return CertReport(name, anchor, case, 0.0, 0.0, 0.0, 0.0, Verdict.DEGENERATE,
                      metadata=meta, **fields)


def error_report(name: str, case: str, exc: Exception) -> CertReport:
    """A failing report for a certifier that stopped with an error."""
    meta = {"reason": str(exc), "error": type(exc).__name__}
    return CertReport(name, "certifier raised", case, 0.0, 0.0, 0.0, 0.0, Verdict.FAIL,
                      metadata=meta)


def pointwise_report(name: str, anchor: str, case: str, lhs: np.ndarray, rhs: np.ndarray,
                     mask: Optional[np.ndarray], tol: float, floor: float = 1e-12,
                     gate: float = 1e-6, **fields) -> CertReport:
    """Pointwise lhs <= rhs on the masked nodes, reported at the worst node.

    Nodes where both sides lie below gate * max|rhs| carry no information
    and are skipped; their count goes into the metadata.
    """
    lhs = np.asarray(lhs, dtype=float).reshape(-1)
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    inside = np.ones(lhs.size, dtype=bool) if mask is None else np.asarray(mask, bool).reshape(-1)
    scale = float(np.max(np.abs(rhs[inside]))) if inside.any() else 0.0
    size = np.maximum(np.abs(lhs), np.abs(rhs))
    live = inside & (size > max(gate * scale, floor * max(scale, 1.0)))
    meta = dict(fields.pop("metadata", {}))
    meta.update({"checked": int(live.sum()), "excluded": int((~inside).sum()),
                 "gated": int((inside & ~live).sum())})
    if not live.any():
        meta["reason"] = "both sides below the noise floor"
        return CertReport(name, anchor, case, float(np.max(lhs[inside], initial=0.0)),
                          scale, 0.0, float(tol), Verdict.DEGENERATE, metadata=meta, **fields)
    rel = (rhs - lhs) / np.where(live, size, 1.0)
    rel = np.where(live, rel, np.inf)
    worst = int(np.argmin(rel))
    meta["node"] = worst
    return make_report(name, anchor, case, lhs[worst], rhs[worst], tol, floor,
                       metadata=meta, **fields)


# --- scenario ------------------------------------------------------------

@dataclass(frozen=True)
class WitnessFunction:
    """A named analytic function of the group coordinates."""
    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    nonnegative: bool = False

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(points, dtype=float)), dtype=float)

    def on_chart(self, chart: GridChart) -> ScalarField:
        return ScalarField(chart, self(chart.nodes()))


@dataclass(frozen=True)
class Scenario:
    """Everything a certifier reads. Built by scenarios.factories.build_scenario."""
    name: str
    model: GroupModel
    chart: GridChart
    curvature: Optional[CurvatureFn]
    test_functions: Tuple[WitnessFunction, ...]
    measures: Mapping[str, DensityField] = field(compare=False)
    measure_pairs: Tuple[Tuple[str, str], ...] = ()
    time_grid: Tuple[float, ...] = (0.05, 0.1, 0.2)
    s_grid: Tuple[float, ...] = (0.25, 0.5, 0.75)
    h_grid: Tuple[float, ...] = (0.05, 0.1)
    eps_list: Tuple[float, ...] = (1.0, 0.1)
    tolerances: ToleranceSpec = ToleranceSpec()
    seed: int = 0
    window_fraction: float = 0.2
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)
    metric: Optional[CCMetric] = None
    fingerprint: str = ""

    def __post_init__(self):
        grid = list(self.time_grid)
        if not grid or grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("time grid must be nonnegative and increasing")
        for a, b in self.measure_pairs:
            if a not in self.measures or b not in self.measures:
                raise InvalidInputError(f"measure pair ({a}, {b}) names an unknown measure")
        if self.metric is None:
            object.__setattr__(self, "metric", CCMetric(self.model))

    @property
    def operator(self):
        return get_heat_operator(self.chart)

    @property
    def window(self) -> np.ndarray:
        return self.chart.window_mask(self.window_fraction)

    @property
    def window_label(self) -> str:
        if self.chart.model.is_torus:
            return "full"
        return f"interior {self.window_fraction:g}"

    @property
    def estimated(self) -> bool:
        return self.curvature is None

    def param(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def rng(self, salt: str) -> np.random.Generator:
        """A generator seeded by (seed, salt), independent of scheduling order."""
        return np.random.default_rng([int(self.seed), zlib.crc32(salt.encode())])

    def measure(self, name: str) -> DensityField:
        try:
            return self.measures[name]
        except KeyError:
            raise InvalidInputError(f"unknown measure {name!r}") from None

    def witness(self, name: str) -> WitnessFunction:
        for w in self.test_functions:
            if w.name == name:
                return w
        raise InvalidInputError(f"unknown test function {name!r}")


def resolve_curvature(scenario: Scenario) -> CurvatureFn:
    """The configured c(t), or the tabulated estimate c-hat with c-hat(0) = 1."""
    if scenario.curvature is not None:
        return scenario.curvature

    def compute() -> CurvatureFn:
        # Import here to avoid circular imports
        from .gradient import estimate_c_hat
        table = estimate_c_hat(scenario)
        knots = sorted(t for t in table if t > 0)
        values = [max(table[t], 1e-12) for t in knots]
        debug_log(f"{scenario.name}: c-hat knots {knots}")
        return CurvatureFn.tabulated([0.0] + knots, [1.0] + values)

    return get_result_store().get_or_compute(("curvature", scenario.fingerprint), compute)


def curvature_label(scenario: Scenario) -> str:
    return "estimated" if scenario.estimated else resolve_curvature(scenario).describe()


def format_case(*parts: Any) -> str:
    """Case key such as 'gauss/centered/t=0.1'."""
    out: List[str] = []
    for part in parts:
        if isinstance(part, tuple):
            key, value = part
            out.append(f"{key}={value:g}" if isinstance(value, float) else f"{key}={value}")
        else:
            out.append(str(part))
    return "/".join(out)


def sorted_reports(reports: Sequence[CertReport]) -> List[CertReport]:
    return sorted(reports, key=lambda r: r.sort_key)


def relative_slack(report: CertReport) -> float:
    """slack / max(|lhs|, |rhs|); zero when both sides vanish."""
    scale = max(abs(report.lhs), abs(report.rhs))
    return float(report.slack / scale) if scale > 0 else 0.0
