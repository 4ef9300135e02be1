"""Entropy-type functionals, the curvature function c(t) and the Heisenberg defects.

Curvature coefficients:

    I_p(t)       = int_0^t c(s)^p ds
    RI(t0, t1)   = int_0^1 c((1-s) t0 + s t1)^-2 ds
    B[h]         = (1 / RI(0, h) - 1) / h

Constant and Exponential curvature functions have closed forms; the
Tabulated kind (linear interpolation between knots) always uses quadrature.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.special import entr, xlogy

from .cc_metric import CCMetric
from .errors import DomainError, InvalidInputError
from .group_core import as_points
from .heat_engine import (HeatOperator, carre_du_champ, heat_evolve_series,
                          lattice_translate)
from .transport import ball_offsets
from .types import DensityField, GridChart, GroupPoint, ScalarField

QUAD_OPTS = {"epsabs": 1e-12, "epsrel": 1e-10, "limit": 200}
MASS_TOL = 1e-6
FISHER_THRESHOLD = 1e-14


def _check_mass(mu: DensityField) -> None:
    if abs(mu.mass - 1.0) > MASS_TOL:
        raise InvalidInputError(f"measure has mass {mu.mass:.8g}, expected 1")


# --- entropy and friends -------------------------------------------------

@dataclass(frozen=True)
class EntropyValue:
    value: float
    finite: bool = True
    mass_checked: bool = True

    def __float__(self) -> float:
        return self.value


def entropy(mu: DensityField) -> EntropyValue:
    """Ent(mu) = sum f log f * cellvol with 0 log 0 = 0."""
    _check_mass(mu)
    value = float(np.sum(xlogy(mu.values, mu.values)) * mu.chart.cell_volume)
    return EntropyValue(value)


def entropy_truncated(mu: DensityField, eps: float) -> float:
    """E_eps(mu) = sum f log(eps + f) * cellvol; decreases to Ent as eps -> 0."""
    if not eps > 0:
        raise InvalidInputError(f"truncation parameter must be positive, got {eps}")
    _check_mass(mu)
    return float(np.sum(mu.values * np.log(eps + mu.values)) * mu.chart.cell_volume)


def fisher(op: HeatOperator, f: DensityField, right_invariant: bool = False,
           scheme: str = "centered") -> float:
    """F(f) = sum over {f > tau} of Gamma(f) / f * cellvol, tau = 1e-14 max f."""
    _check_mass(f)
    gamma = carre_du_champ(op, f, scheme=scheme, right_invariant=right_invariant).values
    tau = FISHER_THRESHOLD * float(np.max(f.values))
    mask = f.values > tau
    return float(np.sum(gamma[mask] / f.values[mask]) * f.chart.cell_volume)


def _node_distances(chart: GridChart, x0: GroupPoint, metric: Optional[CCMetric]) -> np.ndarray:
    metric = metric or CCMetric(chart.model)
    x0 = as_points(chart.model, x0)
    return np.asarray(metric.distance(x0, chart.nodes()))


def second_moment(mu: DensityField, x0: GroupPoint, metric: Optional[CCMetric] = None) -> float:
    """int d^2(x, x0) dmu."""
    chart = mu.chart
    chart.locate(x0)
    d = _node_distances(chart, x0, metric)
    return float(np.sum(mu.values * d * d) * chart.cell_volume)


def reference_normalizer(chart: GridChart, x0: GroupPoint,
                         metric: Optional[CCMetric] = None) -> float:
    """Z = int exp(-d^2(x, x0)) dm over the chart."""
    d = _node_distances(chart, x0, metric)
    return float(np.sum(np.exp(-d * d)) * chart.cell_volume)


def normalized_entropy(mu: DensityField, x0: GroupPoint,
                       metric: Optional[CCMetric] = None) -> float:
    """Entropy relative to m / Z, the reference measure with int exp(-d^2) = 1."""
    return entropy(mu).value + float(np.log(reference_normalizer(mu.chart, x0, metric)))


def ball_volume(chart: GridChart, radius: float, center: Optional[GroupPoint] = None,
                metric: Optional[CCMetric] = None) -> float:
    """Discrete Haar measure of B_r(center) inside the chart (nodes within r times cellvol).

    Without a center the ball sits at the identity and is not clipped by the
    chart walls: its volume is the lattice count of B_r(o).
    """
    if center is None:
        return float(ball_offsets(chart, float(radius), metric).shape[0] * chart.cell_volume)
    d = _node_distances(chart, center, metric)
    return float(np.count_nonzero(d <= radius + 1e-12) * chart.cell_volume)


def lip_estimate(f: ScalarField, metric: Optional[CCMetric] = None,
                 window: Optional[np.ndarray] = None) -> float:
    """max |f(x) - f(y)| / d(x, y) over grid-adjacent pairs y = x.(h e_i).

    With a window mask only pairs whose ends both lie in the window count.
    """
    chart = f.chart
    metric = metric or CCMetric(chart.model)
    n = chart.model.dimension
    flat = f.flat
    inside = None if window is None else np.asarray(window, dtype=bool).reshape(-1)
    best = 0.0
    for i in range(chart.model.horizontal_rank):
        step = np.zeros(n, dtype=np.int64)
        step[i] = 1
        target, valid = lattice_translate(chart, step, side="right")
        if inside is not None:
            valid = valid & inside & inside[target]
        valid &= target != np.arange(chart.size)
        if not np.any(valid):
            continue
        length = metric.distance(np.zeros(n), step * chart.spacing)
        slope = np.abs(flat[target[valid]] - flat[valid]) / length
        best = max(best, float(slope.max()))
    return best


# --- curvature function --------------------------------------------------

class CurvatureKind(str, Enum):
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class CurvatureFn:
    """The function c(t) of the weak Bakry-Emery condition.

    Constant: c = C. Exponential: c = C exp(-K t). Tabulated: linear
    interpolation of `values` at `knots`, undefined outside the knots.
    """
    kind: CurvatureKind
    C: float = 1.0
    K: float = 0.0
    knots: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == CurvatureKind.TABULATED:
            knots = np.asarray(self.knots, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if knots.size < 2 or knots.size != vals.size:
                raise InvalidInputError("tabulated curvature needs matching knots and values (>= 2)")
            if np.any(np.diff(knots) <= 0) or knots[0] < 0:
                raise InvalidInputError("curvature knots must be nonnegative and increasing")
            if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
                raise InvalidInputError("curvature values must be positive and finite")
        elif not (self.C > 0 and np.isfinite(self.C) and np.isfinite(self.K)):
            raise InvalidInputError(f"invalid curvature constants C={self.C}, K={self.K}")

    @classmethod
    def constant(cls, C: float = 1.0) -> "CurvatureFn":
        return cls(CurvatureKind.CONSTANT, float(C))

    @classmethod
    def exponential(cls, C: float, K: float) -> "CurvatureFn":
        return cls(CurvatureKind.EXPONENTIAL, float(C), float(K))

    @classmethod
    def tabulated(cls, knots: Sequence[float], values: Sequence[float]) -> "CurvatureFn":
        return cls(CurvatureKind.TABULATED, knots=tuple(float(k) for k in knots),
                   values=tuple(float(v) for v in values))

    @property
    def t_max(self) -> float:
        return self.knots[-1] if self.kind == CurvatureKind.TABULATED else float("inf")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise DomainError("curvature function is defined for t >= 0")
        if self.kind == CurvatureKind.CONSTANT:
            out = np.full(t_arr.shape, self.C)
        elif self.kind == CurvatureKind.EXPONENTIAL:
            out = self.C * np.exp(-self.K * t_arr)
        else:
            lo, hi = self.knots[0], self.knots[-1]
            if np.any(t_arr < lo - 1e-12) or np.any(t_arr > hi + 1e-12):
                raise DomainError(f"tabulated curvature is undefined outside [{lo}, {hi}]")
            out = np.interp(t_arr, self.knots, self.values)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> str:
        if self.kind == CurvatureKind.CONSTANT:
            return f"constant(C={self.C:g})"
        if self.kind == CurvatureKind.EXPONENTIAL:
            return f"exponential(C={self.C:g}, K={self.K:g})"
        return f"tabulated({len(self.knots)} knots on [{self.knots[0]:g}, {self.knots[-1]:g}])"


def _breakpoints(c: CurvatureFn, lo: float, hi: float):
    if c.kind != CurvatureKind.TABULATED:
        return None
    inner = [k for k in c.knots if lo < k < hi]
    return inner or None


def curvature_moments(c: CurvatureFn, p: float, t: float, method: str = "auto") -> float:
    """I_p(t) = int_0^t c(s)^p ds.

    Args:
        method: "auto" uses closed forms where available; "quad" forces
            adaptive quadrature
    """
    if t < 0:
        raise InvalidInputError("I_p needs t >= 0")
    if t == 0:
        return 0.0
    if c.kind == CurvatureKind.TABULATED and t > c.t_max + 1e-12:
        raise DomainError(f"tabulated curvature is undefined beyond t={c.t_max}")
    if method == "auto" and c.kind == CurvatureKind.CONSTANT:
        return c.C ** p * t
    if method == "auto" and c.kind == CurvatureKind.EXPONENTIAL:
        rate = p * c.K
        if rate == 0:
            return c.C ** p * t
        return c.C ** p * float(-np.expm1(-rate * t)) / rate
    value, _ = quad(lambda s: c(s) ** p, 0.0, t, points=_breakpoints(c, 0.0, t), **QUAD_OPTS)
    return float(value)


def mean_RI(c: CurvatureFn, t0: float, t1: float, method: str = "auto") -> float:
    """RI(t0, t1), the mean of c^-2 along [t0, t1]; RI(t, t) = c(t)^-2."""
    if t1 < t0:
        raise InvalidInputError("mean_RI needs t1 >= t0")
    span = t1 - t0
    if span == 0:
        return float(c(t0)) ** -2
    if method == "auto" and c.kind == CurvatureKind.CONSTANT:
        return c.C ** -2
    if method == "auto" and c.kind == CurvatureKind.EXPONENTIAL:
        rate = 2.0 * c.K
        if rate == 0:
            return c.C ** -2
        return c.C ** -2 * float(np.expm1(rate * span)) * float(np.exp(rate * t0)) / (rate * span)
    brk = _breakpoints(c, t0, t1)
    pts = None if brk is None else [(k - t0) / span for k in brk]
    value, _ = quad(lambda s: c(t0 + s * span) ** -2, 0.0, 1.0, points=pts, **QUAD_OPTS)
    return float(value)


def heated_coefficient_B(c: CurvatureFn, h: float, method: str = "auto") -> float:
    """B[h] = (1 / RI(0, h) - 1) / h."""
    if not h > 0:
        raise InvalidInputError("B[h] needs h > 0")
    return (1.0 / mean_RI(c, 0.0, h, method) - 1.0) / h


def carnot_curvature(C: float) -> CurvatureFn:
    """Constant c = C_G of a Carnot group."""
    return CurvatureFn.constant(C)


def su2_curvature(C: float = float(np.sqrt(2.0))) -> CurvatureFn:
    """c(t) = C exp(-2t), the SU(2) curvature function."""
    return CurvatureFn.exponential(C, 2.0)


def su2_evi_factor(t0: float, t1: float, C: float = float(np.sqrt(2.0))) -> float:
    """1 / RI(t0, t1) for SU(2): C^2 4 (t1 - t0) / (e^{4 t1} - e^{4 t0})."""
    if t1 < t0:
        raise InvalidInputError("su2_evi_factor needs t1 >= t0")
    if t1 == t0:
        return C * C * float(np.exp(-4.0 * t0))
    return C * C * 4.0 * (t1 - t0) / (float(np.exp(4.0 * t1)) - float(np.exp(4.0 * t0)))


def fit_exponential_bound(ts: Sequence[float], c_hat: Sequence[float]) -> Tuple[float, float]:
    """(M, K) with c_hat(t) <= M exp(-K t) at every sample.

    K is the least-squares slope of -log c_hat; M is then the smallest
    constant making the envelope hold.
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(c_hat, dtype=float)
    if ts.size != vals.size or ts.size == 0 or np.any(vals <= 0):
        raise InvalidInputError("exponential fit needs matching positive samples")
    if np.unique(ts).size < 2:
        return float(vals.max()), 0.0
    slope, _ = np.polyfit(ts, np.log(vals), 1)
    K = float(-slope)
    M = float(np.max(vals * np.exp(K * ts)))
    return M, K


# --- Heisenberg defects --------------------------------------------------

def defect_w(s) -> float:
    """w(s) = -2 log((1-s)^(1-s) s^s); w(1/2) = log 4."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr > 1):
        raise InvalidInputError("w(s) is defined for s in [0, 1]")
    out = 2.0 * (entr(s_arr) + entr(1.0 - s_arr))
    return float(out) if out.ndim == 0 else out


def sigma_bound(op: HeatOperator, s: float, u: GroupPoint, f0: DensityField, C: float,
                metric: Optional[CCMetric] = None) -> float:
    """d(u, o) sqrt(2 s (1-s) (C^2 - 1) F~(f0)) for a horizontal u.

    F~ is the Fisher information built from the right-invariant frame.
    """
    model = op.chart.model
    u = as_points(model, u)
    if model.is_heisenberg and u[2] != 0.0:
        raise InvalidInputError("sigma bound needs a horizontal point (u_z = 0)")
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError("s must lie in [0, 1]")
    metric = metric or CCMetric(model)
    du = metric.distance(np.zeros(model.dimension), u)
    factor = 2.0 * s * (1.0 - s) * max(C * C - 1.0, 0.0)
    if factor == 0.0:
        return 0.0
    return float(du * np.sqrt(factor * fisher(op, f0, right_invariant=True)))


def sigma_step(s: float, C: float, w2: float, fisher_bound: float) -> float:
    """h = sqrt(s(1-s)(C^2-1) W^2 / (2 F)), the minimizer of a/(2h) + h F; 0 when a = 0."""
    coeff = s * (1.0 - s) * max(C * C - 1.0, 0.0) * w2 * w2
    if coeff <= 0 or not fisher_bound > 0:
        return 0.0
    return float(np.sqrt(coeff / (2.0 * fisher_bound)))


def sigma_defect(op: HeatOperator, mu_s: DensityField, w2: float, s: float, C: float,
                 h_grid: Sequence[float], samples: int = 8,
                 dt: Optional[float] = None,
                 fisher_bound: Optional[float] = None) -> Tuple[float, float]:
    """min over h of s(1-s)(C^2-1) W^2 / (2h) + int_0^h F(H_r mu_s) dr.

    The candidates are h_grid plus, when fisher_bound is given, the step
    `sigma_step` that is optimal for a Fisher information bounded by it.
    The time integral uses the trapezoid rule on `samples` panels per h.
    When s(1-s)(C^2-1) W^2 vanishes the infimum is 0, reached as h -> 0.

    Returns:
        (defect value, minimizing h)
    """
    if not h_grid or min(h_grid) <= 0:
        raise InvalidInputError("h grid must be positive and non-empty")
    coeff = s * (1.0 - s) * max(C * C - 1.0, 0.0) * w2 * w2
    if coeff <= 0:
        return 0.0, 0.0
    h_grid = [float(h) for h in h_grid]
    if fisher_bound is not None:
        h_star = sigma_step(s, C, w2, fisher_bound)
        if h_star > 0:
            h_grid.append(h_star)
    times = sorted({h * k / samples for h in h_grid for k in range(samples + 1)})
    flow = heat_evolve_series(op, mu_s, times, dt)
    fvals = {t: fisher(op, m) for t, m in zip(times, flow)}
    best, best_h = np.inf, h_grid[0]
    for h in h_grid:
        grid = [float(h) * k / samples for k in range(samples + 1)]
        integral = float(trapezoid([fvals[t] for t in grid], grid))
        value = coeff / (2.0 * h) + integral
        if value < best:
            best, best_h = value, float(h)
    return float(best), best_h
