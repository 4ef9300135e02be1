"""Optimal transport between finite measures on a group model.

Exact plans come from the POT network simplex (`ot.emd`); above the LP cap
the entropic solver `w2_sinkhorn` is used. Grid densities are turned into
point clouds with `density_to_cloud` and back with `cloud_to_density`.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import ot
from scipy.special import logsumexp

from .cc_metric import CCMetric, geodesic_point
from .errors import CapacityError, InvalidInputError, NumericalError
from .group_core import as_points, multiply
from .heat_engine import lattice_translate
from .types import DensityField, GridChart, GroupModel, GroupPoint, PointCloudMeasure
from .utils import debug_log

LP_CAP = 400
EMD_MAX_ITER = 1_000_000
SINKHORN_SCHEDULE = (1.0, 0.3, 0.1, 0.03)
SINKHORN_FINE_SCHEDULE = (1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4)
SINKHORN_ACCEPT = 1e-3

Measure = Union[DensityField, PointCloudMeasure]


@dataclass
class Potential:
    """Real values attached to a finite set of points."""
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.points.shape[0] != self.values.size:
            raise InvalidInputError("potential needs one value per point")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("potential values must be finite")

    @classmethod
    def constant(cls, points: np.ndarray, value: float = 0.0) -> "Potential":
        pts = np.atleast_2d(points)
        return cls(pts, np.full(pts.shape[0], float(value)))


@dataclass
class TransportPlan:
    """A coupling between two point clouds and its total cost."""
    source: PointCloudMeasure
    target: PointCloudMeasure
    coupling: np.ndarray
    cost: float
    power: int = 2
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def distance(self) -> float:
        """W_p = cost^(1/p)."""
        return float(max(self.cost, 0.0) ** (1.0 / self.power))

    def marginal_error(self) -> float:
        rows = np.abs(self.coupling.sum(axis=1) - self.source.weights).max()
        cols = np.abs(self.coupling.sum(axis=0) - self.target.weights).max()
        return float(max(rows, cols))


def cost_matrix(metric: CCMetric, xs: np.ndarray, ys: np.ndarray, power: int = 2) -> np.ndarray:
    d = metric.pairwise(xs, ys)
    return np.ascontiguousarray(d ** power, dtype=float)


def _check_models(metric: CCMetric, *measures: PointCloudMeasure) -> None:
    for m in measures:
        if m.model != metric.model:
            raise InvalidInputError("measure and metric belong to different models")


# --- Hopf-Lax ------------------------------------------------------------

def hopf_lax(metric: CCMetric, phi: Potential, s: float,
             at: Optional[np.ndarray] = None) -> Potential:
    """Q_s phi(x) = min_y phi(y) + d(y, x)^2 / (2s), exact over the support of phi.

    Args:
        at: evaluation points; defaults to the support of phi
    """
    if not s > 0:
        raise InvalidInputError(f"Hopf-Lax time must be positive, got {s}")
    pts = phi.points if at is None else np.atleast_2d(np.asarray(at, dtype=float))
    cost = cost_matrix(metric, phi.points, pts)
    vals = np.min(phi.values[:, None] + cost / (2.0 * s), axis=0)
    return Potential(pts, vals)


# --- exact solvers -------------------------------------------------------

def _emd(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    plan, log = ot.emd(a, b, cost, numItermax=EMD_MAX_ITER, log=True)
    if log.get("warning"):
        raise NumericalError(f"network simplex stopped early: {log['warning']}",
                             {"result_code": log.get("result_code")})
    return plan, log


def _check_capacity(mu: PointCloudMeasure, nu: PointCloudMeasure, cap: int) -> None:
    if mu.size > cap or nu.size > cap:
        raise CapacityError(
            f"exact LP limited to {cap}x{cap} atoms (got {mu.size}x{nu.size}); "
            "use w2_sinkhorn for larger supports")


def w2_exact(metric: CCMetric, mu: PointCloudMeasure, nu: PointCloudMeasure,
             cap: int = LP_CAP) -> TransportPlan:
    """Optimal coupling for the cost d^2 by network simplex.

    One-dimensional box models use the sorted (monotone) coupling, which is
    exact and carries no size cap.
    """
    _check_models(metric, mu, nu)
    model = metric.model
    if model.dimension == 1 and not model.is_torus:
        plan = ot.emd_1d(mu.points[:, 0], nu.points[:, 0], mu.weights, nu.weights,
                         metric="sqeuclidean", dense=True)
        plan = np.asarray(plan, dtype=float)
        cost = (mu.points[:, 0][:, None] - nu.points[:, 0][None, :]) ** 2
        method = "emd_1d"
    else:
        _check_capacity(mu, nu, cap)
        cost = cost_matrix(metric, mu.points, nu.points)
        plan, _ = _emd(mu.weights, nu.weights, cost)
        method = "network_simplex"
    total = float(np.sum(plan * cost))
    return TransportPlan(mu, nu, plan, total, 2, {"method": method})


def w1_dual(metric: CCMetric, mu: PointCloudMeasure, nu: PointCloudMeasure,
            cap: int = LP_CAP) -> float:
    """W_1 by exact LP, checked against the Kantorovich-Rubinstein dual value."""
    _check_models(metric, mu, nu)
    _check_capacity(mu, nu, cap)
    cost = cost_matrix(metric, mu.points, nu.points, power=1)
    plan, log = _emd(mu.weights, nu.weights, cost)
    primal = float(np.sum(plan * cost))
    dual = float(np.dot(mu.weights, log["u"]) + np.dot(nu.weights, log["v"]))
    if abs(primal - dual) > 1e-8 * max(1.0, primal):
        raise NumericalError("W1 primal and dual values disagree",
                             {"primal": primal, "dual": dual})
    return primal


def _quantile_pieces(density: DensityField):
    chart = density.chart
    if chart.model.dimension != 1 or chart.model.is_torus:
        raise InvalidInputError("1-D quantile transport needs a one-dimensional box chart")
    mass = density.flat * chart.cell_volume
    total = float(mass.sum())
    if total <= 0:
        raise InvalidInputError("cannot transport a density of zero mass")
    keep = np.nonzero(mass > 0)[0]
    mass = mass[keep] / total
    ends = np.cumsum(mass)
    ends[-1] = 1.0
    left = chart.lo[0] + keep * chart.spacing[0]
    return left, ends - mass, ends, mass, float(chart.spacing[0])


def w2_density_1d(f: DensityField, g: DensityField) -> float:
    """Exact W_2 between two piecewise-constant densities on a line.

    Both quantile functions are piecewise linear, so the squared difference
    is integrated exactly on the merged breakpoints.
    """
    la, sa, ea, ma, ha = _quantile_pieces(f)
    lb, sb, eb, mb, hb = _quantile_pieces(g)
    q = np.unique(np.concatenate([[0.0], ea, eb]))
    q0, q1 = q[:-1], q[1:]
    mid = 0.5 * (q0 + q1)
    ia = np.minimum(np.searchsorted(ea, mid), ea.size - 1)
    ib = np.minimum(np.searchsorted(eb, mid), eb.size - 1)

    def diff(at):
        xa = la[ia] + (at - sa[ia]) / ma[ia] * ha
        xb = lb[ib] + (at - sb[ib]) / mb[ib] * hb
        return xa - xb

    d0, d1 = diff(q0), diff(q1)
    total = np.sum((q1 - q0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0)
    return float(np.sqrt(max(total, 0.0)))


def axis_marginal(field: DensityField, axis: int) -> DensityField:
    """Marginal of a grid density along one axis, as a density on a line chart."""
    chart = field.chart
    if chart.model.is_torus:
        raise InvalidInputError("axis marginals need a chart with walls")
    others = tuple(k for k in range(chart.model.dimension) if k != axis)
    masses = np.sum(field.values, axis=others) * chart.cell_volume
    line = GridChart.box(GroupModel.box(1), [chart.lo[axis]], [chart.hi[axis]],
                         [chart.shape[axis]])
    return DensityField.from_mass(line, masses)


def w2_marginals(f: DensityField, g: DensityField) -> float:
    """sqrt(sum_k W_2^2(f_k, g_k)) over the horizontal axis marginals.

    Never exceeds W_2(f, g): the horizontal projection is 1-Lipschitz and
    the cost splits over coordinates. Equality holds for product densities
    on a box.
    """
    if f.chart != g.chart:
        raise InvalidInputError("densities live on different charts")
    total = 0.0
    for axis in range(f.chart.model.horizontal_rank):
        w = w2_density_1d(axis_marginal(f, axis), axis_marginal(g, axis))
        total += w * w
    return float(np.sqrt(total))


def product_defect(field: DensityField) -> float:
    """Relative L1 distance between a density and the product of its axis marginals."""
    chart = field.chart
    masses = field.values * chart.cell_volume
    total = float(masses.sum())
    if total <= 0:
        raise InvalidInputError("density has zero mass")
    masses = masses / total
    product = np.ones(())
    for axis in range(chart.model.dimension):
        others = tuple(k for k in range(chart.model.dimension) if k != axis)
        marginal = masses.sum(axis=others)
        product = np.multiply.outer(product, marginal)
    return float(np.abs(masses - product).sum())


# --- entropic solver -----------------------------------------------------

def _round_to_polytope(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Projection onto the couplings of (a, b) by row/column scaling plus a rank-one fix."""
    rows = plan.sum(axis=1)
    plan = plan * np.minimum(a / np.where(rows > 0, rows, 1.0), 1.0)[:, None]
    cols = plan.sum(axis=0)
    plan = plan * np.minimum(b / np.where(cols > 0, cols, 1.0), 1.0)[None, :]
    err_a = a - plan.sum(axis=1)
    err_b = b - plan.sum(axis=0)
    deficit = err_a.sum()
    if deficit > 0:
        plan = plan + np.outer(err_a, err_b) / deficit
    return plan


def _sinkhorn_potentials(cost: np.ndarray, a: np.ndarray, b: np.ndarray,
                         schedule: Sequence[float], stop: float, max_iter: int):
    scale = float(cost.mean())
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    la, lb = np.log(a), np.log(b)
    err, iters, eps = np.inf, 0, scale
    for frac in schedule:
        eps = frac * scale
        for it in range(max_iter):
            f = eps * la - eps * logsumexp((g[None, :] - cost) / eps, axis=1)
            g = eps * lb - eps * logsumexp((f[:, None] - cost) / eps, axis=0)
            iters += 1
            if it % 10 == 9:
                plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
                err = float(np.abs(plan.sum(axis=1) - a).sum())
                if err < stop:
                    break
        debug_log(f"sinkhorn eps={eps:.3g} marginal error={err:.3g}")
    plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
    err = float(np.abs(plan.sum(axis=1) - a).sum())
    return f, g, plan, err, eps, iters


def w2_sinkhorn(metric: CCMetric, mu: PointCloudMeasure, nu: PointCloudMeasure,
                schedule: Sequence[float] = SINKHORN_SCHEDULE, stop: float = 1e-10,
                max_iter: int = 5000, exact_cap: int = LP_CAP) -> TransportPlan:
    """Entropic coupling with epsilon annealing, rounded onto the transport polytope.

    The schedule lists regularization strengths as fractions of the mean cost.
    The metadata records the regularization gap to the exact value:
    `gap_bound` (plan cost minus a feasible dual value) always, and `gap`
    (plan cost minus the network simplex optimum) when both supports fit
    under exact_cap.

    Raises:
        NumericalError: the final marginal error exceeds SINKHORN_ACCEPT
    """
    _check_models(metric, mu, nu)
    if not schedule or any(b >= a for a, b in zip(schedule, schedule[1:])) or min(schedule) <= 0:
        raise InvalidInputError("epsilon schedule must be positive and decreasing")
    a, b = mu.weights, nu.weights
    cost = cost_matrix(metric, mu.points, nu.points)
    if float(cost.mean()) == 0.0:
        plan = np.outer(a, b)
        return TransportPlan(mu, nu, plan, 0.0, 2, {"method": "sinkhorn", "epsilon": 0.0,
                                                    "gap_bound": 0.0, "gap": 0.0})
    f, g, plan, err, eps, iters = _sinkhorn_potentials(cost, a, b, schedule, stop, max_iter)
    if not np.isfinite(err) or err > SINKHORN_ACCEPT:
        raise NumericalError("Sinkhorn did not converge",
                             {"marginal_error": err, "epsilon": eps, "iterations": iters})
    plan = _round_to_polytope(plan, a, b)
    total = float(np.sum(plan * cost))
    # c-transform of f makes (f, g) feasible, so the dual value is a lower bound
    g_feasible = np.min(cost - f[:, None], axis=0)
    dual = float(np.dot(a, f) + np.dot(b, g_feasible))
    meta = {"method": "sinkhorn", "epsilon": eps, "iterations": iters,
            "marginal_error_before_rounding": err, "dual_value": dual,
            "gap_bound": max(total - dual, 0.0)}
    if mu.size <= exact_cap and nu.size <= exact_cap:
        exact, _ = _emd(a, b, cost)
        meta["exact_cost"] = float(np.sum(exact * cost))
        meta["gap"] = total - meta["exact_cost"]
    debug_log(f"sinkhorn gap bound {meta['gap_bound']:.3g} at eps={eps:.3g}")
    return TransportPlan(mu, nu, plan, total, 2, meta)


# --- Kantorovich duality -------------------------------------------------

def kantorovich_dual_value(metric: CCMetric, phi: Potential, mu: PointCloudMeasure,
                           nu: PointCloudMeasure) -> float:
    """int Q_1 phi dmu - int phi dnu for phi given on the support of nu.

    Never exceeds W_2^2(mu, nu) / 2.
    """
    if phi.points.shape != nu.points.shape or not np.allclose(phi.points, nu.points):
        raise InvalidInputError("potential must live on the support of nu")
    q = hopf_lax(metric, phi, 1.0, at=mu.points)
    return float(np.dot(mu.weights, q.values) - np.dot(nu.weights, phi.values))


def kantorovich_ascent(metric: CCMetric, mu: PointCloudMeasure, nu: PointCloudMeasure,
                       schedule: Sequence[float] = SINKHORN_FINE_SCHEDULE,
                       rounds: int = 20) -> Tuple[Potential, float]:
    """Dual potential on the support of nu from the Sinkhorn dual, polished by c-transforms.

    Each round replaces phi by the largest-value potential compatible with
    Q_1 phi on the support of mu, so the dual value never decreases.
    """
    _check_models(metric, mu, nu)
    cost = cost_matrix(metric, mu.points, nu.points)
    if float(cost.mean()) == 0.0:
        phi = Potential.constant(nu.points)
        return phi, kantorovich_dual_value(metric, phi, mu, nu)
    _, g, _, _, _, _ = _sinkhorn_potentials(cost, mu.weights, nu.weights,
                                            schedule, 1e-10, 5000)
    half = 0.5 * cost
    phi_vals = -0.5 * g
    best = -np.inf
    for _ in range(rounds):
        psi = np.min(phi_vals[None, :] + half, axis=1)
        phi_vals = np.max(psi[:, None] - half, axis=0)
        value = float(np.dot(mu.weights, psi) - np.dot(nu.weights, phi_vals))
        if value <= best + 1e-15:
            break
        best = value
    phi = Potential(nu.points, phi_vals)
    return phi, kantorovich_dual_value(metric, phi, mu, nu)


# --- interpolation and push-forwards ---------------------------------------

def displacement_interpolate(metric: CCMetric, plan: TransportPlan, s: float) -> PointCloudMeasure:
    """Atom-wise geodesic interpolation of an optimal plan at time s."""
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError(f"interpolation time must lie in [0, 1], got {s}")
    if s == 0.0:
        return plan.source
    if s == 1.0:
        return plan.target
    i, j = np.nonzero(plan.coupling > 0)
    pts = geodesic_point(metric.model, plan.source.points[i], plan.target.points[j],
                         np.full(i.size, s), metric.oracle)
    return PointCloudMeasure(metric.model, pts, plan.coupling[i, j], normalize=True)


def push_forward(model: GroupModel, mu: PointCloudMeasure, x: GroupPoint,
                 side: str = "left") -> PointCloudMeasure:
    """Image of mu under p -> x.p (side="left") or p -> p.x (side="right")."""
    if side not in ("left", "right"):
        raise InvalidInputError(f"side must be 'left' or 'right', got {side!r}")
    x = as_points(model, x)
    pts = multiply(model, x, mu.points) if side == "left" else multiply(model, mu.points, x)
    return PointCloudMeasure(model, pts, mu.weights)


def right_translation_curve(model: GroupModel, mu0: PointCloudMeasure, u: GroupPoint,
                            s_grid: Sequence[float]) -> List[PointCloudMeasure]:
    """mu_s = (T_s)# mu0 with T_s(x) = x.(s u) for a horizontal u."""
    u = as_points(model, u)
    if model.is_heisenberg and u[2] != 0.0:
        raise InvalidInputError("right-translation geodesics need a horizontal point (u_z = 0)")
    return [push_forward(model, mu0, float(s) * u, side="right") for s in s_grid]


# --- grid conversions ----------------------------------------------------

def _block_coarsen(chart: GridChart, masses: np.ndarray, factor: int):
    pts = chart.nodes()
    idx = np.indices(chart.shape).reshape(len(chart.shape), -1).T // factor
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    flat_m = masses.reshape(-1)
    total = np.bincount(inverse, weights=flat_m, minlength=keys.shape[0])
    coords = np.stack([np.bincount(inverse, weights=flat_m * pts.reshape(-1, pts.shape[-1])[:, k],
                                   minlength=keys.shape[0])
                       for k in range(pts.shape[-1])], axis=-1)
    keep = total > 0
    return coords[keep] / total[keep, None], total[keep]


def _thresholded(field: DensityField, threshold: float) -> np.ndarray:
    masses = field.values * field.chart.cell_volume
    masses = np.where(masses > threshold, masses, 0.0)
    if masses.sum() <= 0:
        raise InvalidInputError("density has no mass above the threshold")
    return masses


def _occupied_blocks(masses: np.ndarray, factor: int) -> int:
    idx = np.argwhere(masses > 0) // factor
    return int(np.unique(idx, axis=0).shape[0])


def block_factor(field: DensityField, max_atoms: int, threshold: float = 1e-12) -> int:
    """Smallest block size whose coarsening of field has at most max_atoms atoms."""
    if max_atoms < 1:
        raise InvalidInputError("max_atoms must be positive")
    masses = _thresholded(field, threshold)
    factor = 1
    while _occupied_blocks(masses, factor) > max_atoms:
        factor += 1
    return factor


def common_block_factor(fields: Sequence[DensityField], max_atoms: int,
                        threshold: float = 1e-12) -> int:
    """One block size that brings every field under max_atoms.

    W_2 values compared with each other should use clouds coarsened by the
    same factor, so the coarsening bias is the same on both sides.
    """
    if not fields:
        raise InvalidInputError("no densities to coarsen")
    return max(block_factor(f, max_atoms, threshold) for f in fields)


def density_to_cloud(field: DensityField, threshold: float = 1e-12,
                     max_atoms: Optional[int] = None,
                     factor: Optional[int] = None) -> PointCloudMeasure:
    """Cell masses above threshold as atoms at the cell centres.

    Cells are merged in blocks of factor^n, each block becoming one atom at
    its centre of mass. Without an explicit factor the smallest one that
    fits max_atoms is used.
    """
    chart = field.chart
    masses = _thresholded(field, threshold)
    keep = masses.reshape(-1) > 0
    if factor is None:
        factor = 1 if max_atoms is None else block_factor(field, max_atoms, threshold)
    elif factor < 1:
        raise InvalidInputError("block factor must be >= 1")
    if factor == 1:
        pts = chart.points()[keep]
        return PointCloudMeasure(chart.model, pts, masses.reshape(-1)[keep], normalize=True)
    pts, w = _block_coarsen(chart, masses, factor)
    debug_log(f"density_to_cloud: {keep.sum()} cells -> {w.size} atoms (block {factor})")
    return PointCloudMeasure(chart.model, pts, w, normalize=True)


def cloud_to_density(chart: GridChart, mu: PointCloudMeasure) -> DensityField:
    """Deposit each atom on its nearest node."""
    if mu.model != chart.model:
        raise InvalidInputError("measure and chart belong to different models")
    masses = np.zeros(chart.shape)
    for p, w in zip(mu.points, mu.weights):
        masses[chart.locate(p)] += w
    return DensityField.from_mass(chart, masses)


# --- convolution by the normalized ball ----------------------------------

@lru_cache(maxsize=64)
def _ball_lattice(model: GroupModel, radius: float, spacing: Tuple[float, ...],
                  metric: Optional[CCMetric]) -> np.ndarray:
    sp = np.asarray(spacing)
    metric = metric or CCMetric(model)
    n = model.dimension
    rng = [np.arange(-int(np.floor(radius / sp[k] + 1e-9)), int(np.floor(radius / sp[k] + 1e-9)) + 1)
           for k in range(model.horizontal_rank)]
    if model.is_heisenberg:
        # the ball of radius r reaches heights up to r^2 / (4 pi)
        kz = int(np.ceil(radius * radius / (4.0 * np.pi * sp[2])))
        rng.append(np.arange(-kz, kz + 1))
    grid = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1).reshape(-1, n)
    d = np.atleast_1d(metric.distance(np.zeros(n), grid * sp))
    return grid[d <= radius + 1e-12]


def ball_offsets(chart: GridChart, radius: float, metric: Optional[CCMetric] = None) -> np.ndarray:
    """Lattice offsets b (in lattice units) with d(o, b) <= radius."""
    return _ball_lattice(chart.model, float(radius), tuple(float(s) for s in chart.spacing), metric)


def ball_points(model: GroupModel, radius: float, spacing: Optional[float] = None,
                metric: Optional[CCMetric] = None) -> np.ndarray:
    """Coordinates of a discretized ball B_r(o) on the lattice of horizontal spacing h.

    h defaults to r/2, the coarsest lattice that resolves the ball. On H^1
    the vertical spacing is h^2/2.
    """
    if not radius > 0:
        raise InvalidInputError("ball radius must be positive")
    h = 0.5 * radius if spacing is None else float(spacing)
    sp = [h] * model.dimension
    if model.is_heisenberg:
        sp[2] = 0.5 * h * h
    offsets = _ball_lattice(model, float(radius), tuple(sp), metric)
    return offsets * np.asarray(sp)


def convolve_cloud(model: GroupModel, radius: float, mu: PointCloudMeasure,
                   spacing: Optional[float] = None,
                   metric: Optional[CCMetric] = None,
                   ball: Optional[np.ndarray] = None) -> PointCloudMeasure:
    """rho_r * mu for a point cloud: each atom y is spread over b.y, b in the discrete ball.

    A precomputed (for instance subsampled) set of ball points may be passed
    as `ball`; the kernel is then uniform on those points.
    """
    if mu.model != model:
        raise InvalidInputError("measure and model differ")
    if ball is None:
        ball = ball_points(model, radius, spacing, metric)
    ball = np.atleast_2d(np.asarray(ball, dtype=float))
    if ball.shape[0] == 0 or ball.shape[1] != model.dimension:
        raise InvalidInputError("ball points must be a non-empty (k, n) array")
    pts = multiply(model, ball[:, None, :], mu.points[None, :, :]).reshape(-1, model.dimension)
    weights = np.broadcast_to(mu.weights[None, :] / ball.shape[0],
                              (ball.shape[0], mu.size)).reshape(-1)
    return PointCloudMeasure(model, pts, weights, normalize=True)


def convolve_measure(chart: GridChart, radius: float, mu: Measure,
                     metric: Optional[CCMetric] = None) -> DensityField:
    """Left convolution rho_r * mu with rho_r the normalized indicator of B_r(o).

    Mass sitting at y is spread uniformly over the lattice points b.y with
    b in the ball, so the result is again a probability density on the chart.
    """
    if radius < 2.0 * float(chart.spacing[0]):
        raise InvalidInputError(
            f"radius {radius} is below two grid spacings ({2 * chart.spacing[0]:.4g})")
    if isinstance(mu, PointCloudMeasure):
        mu = cloud_to_density(chart, mu)
    elif mu.chart != chart:
        raise InvalidInputError("density lives on a different chart")
    masses = mu.flat * chart.cell_volume
    offsets = ball_offsets(chart, float(radius), metric)
    out = np.zeros(chart.size)
    share = masses / offsets.shape[0]
    lost = 0.0
    for off in offsets:
        target, valid = lattice_translate(chart, off, side="left")
        np.add.at(out, target[valid], share[valid])
        lost += float(share[~valid].sum())
    if lost > 1e-9:
        raise InvalidInputError(f"ball of radius {radius} pushes mass {lost:.3g} outside the chart")
    return DensityField.from_mass(chart, out.reshape(chart.shape))


def regularize_curve(chart: GridChart, curve: Sequence[Measure], radius: float,
                     width: int) -> List[DensityField]:
    """Space convolution by rho_r followed by a symmetric time mollifier.

    The curve is extended by constants at both ends, so output i is a
    triangular-weighted average of the convolved measures i-width..i+width.
    """
    if width < 0:
        raise InvalidInputError("time mollifier width must be nonnegative")
    if not curve:
        raise InvalidInputError("curve is empty")
    smoothed = [convolve_measure(chart, radius, mu) for mu in curve]
    stack = np.stack([m.values for m in smoothed])
    padded = np.concatenate([np.repeat(stack[:1], width, axis=0), stack,
                             np.repeat(stack[-1:], width, axis=0)])
    kernel = (width + 1.0) - np.abs(np.arange(-width, width + 1))
    kernel = kernel / kernel.sum()
    out = []
    for i in range(len(curve)):
        vals = np.tensordot(kernel, padded[i:i + 2 * width + 1], axes=1)
        out.append(DensityField(chart, vals))
    return out
