"""Discrete heat semigroup on a grid chart.

The sub-Laplacian is assembled from group translations of the chart lattice.
For each horizontal generator e_i let D_i be the forward difference along
the lattice edge p -> p.(h e_i), kept only when both ends lie in the chart
(wrapping on the torus). Then

    L = -sum_i D_i^T D_i

which is symmetric, negative semidefinite, has zero row sums and
nonnegative off-diagonal entries. On H^1 the right translation by h e_1
maps (x, y, z) to (x + h, y, z - y h/2), which stays on the lattice because
z is measured in units of h^2/2; so L commutes exactly with left lattice
translations away from the walls.
"""
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.sparse import csr_matrix, identity as sparse_identity, vstack
from scipy.sparse.linalg import cg

from .errors import InvalidInputError, NumericalError
from .types import Boundary, DensityField, GridChart, GroupPoint, ScalarField
from .utils import debug_log

F = TypeVar("F", bound=ScalarField)

CG_RTOL = 1e-10
CG_MAXITER = 2000
CN_CACHE_SIZE = 8


# --- lattice translations ------------------------------------------------

@lru_cache(maxsize=32)
def _lattice_coords(chart: GridChart) -> np.ndarray:
    return chart.lattice_indices()


def lattice_translate(chart: GridChart, offset: Sequence[int],
                      side: str = "right") -> Tuple[np.ndarray, np.ndarray]:
    """Node targets of the translation by a lattice vector.

    Args:
        chart: the grid chart
        offset: lattice vector in lattice units (z in units of h^2/2 on H^1)
        side: "right" maps p -> p.s, "left" maps p -> s.p

    Returns:
        (target flat indices, validity mask); invalid targets left the chart
    """
    if side not in ("left", "right"):
        raise InvalidInputError(f"side must be 'left' or 'right', got {side!r}")
    off = np.asarray(offset, dtype=np.int64)
    if off.shape != (chart.model.dimension,):
        raise InvalidInputError("lattice offset has the wrong dimension")
    coords = _lattice_coords(chart)
    target = coords + off
    if chart.model.is_heisenberg:
        i, j = coords[:, 0], coords[:, 1]
        a, b = int(off[0]), int(off[1])
        if side == "right":
            target[:, 2] += i * b - j * a
        else:
            target[:, 2] += a * j - b * i
    origin = np.asarray(chart.lattice_origin, dtype=np.int64)
    shape = np.asarray(chart.shape, dtype=np.int64)
    local = target - origin
    if chart.boundary == Boundary.PERIODIC:
        local = np.mod(local, shape)
        valid = np.ones(local.shape[0], dtype=bool)
    else:
        valid = np.all((local >= 0) & (local < shape), axis=1)
        local = np.where(valid[:, None], local, 0)
    flat = np.ravel_multi_index(tuple(local.T), chart.shape)
    return flat, valid


def interior_window(chart: GridChart, fraction: float = 0.2) -> np.ndarray:
    """Nodes at distance >= fraction * extent from every wall."""
    return chart.window_mask(fraction)


def _unit(n: int, axis: int, sign: int = 1) -> Tuple[int, ...]:
    e = [0] * n
    e[axis] = sign
    return tuple(e)


def translate_values(chart: GridChart, values: np.ndarray, offset: Sequence[int],
                     side: str = "left", fill: float = 0.0) -> np.ndarray:
    """Composition f(s.p) (side="left") or f(p.s) (side="right") on the chart."""
    target, valid = lattice_translate(chart, offset, side)
    flat = np.asarray(values, dtype=float).reshape(-1)
    out = np.where(valid, flat[target], fill)
    return out.reshape(chart.shape)


def push_forward_density(field: DensityField, offset: Sequence[int],
                         side: str = "right", max_loss: float = 1e-12) -> DensityField:
    """Image of a density under p -> p.s (side="right") or p -> s.p.

    Translations preserve the Haar measure, so cell masses move unchanged.
    Mass pushed off the chart is dropped and the rest rescaled to the
    original total, provided the dropped fraction is at most max_loss.
    """
    chart = field.chart
    target, valid = lattice_translate(chart, offset, side)
    flat = field.flat
    mass = field.mass
    lost = float(np.sum(flat[~valid])) * chart.cell_volume
    if lost > max_loss * max(mass, 1e-300):
        raise InvalidInputError(f"translation moves mass {lost:.3g} outside the chart "
                                f"(allowed fraction {max_loss:g})")
    out = np.zeros(chart.size)
    out[target[valid]] = flat[valid]
    if lost > 0:
        out *= mass / (mass - lost)
    return DensityField(chart, out)


def stays_on_chart(chart: GridChart, offsets: Sequence[Sequence[int]],
                   side: str = "right") -> np.ndarray:
    """Mask of nodes whose image under every offset is still a chart node."""
    keep = np.ones(chart.size, dtype=bool)
    for off in offsets:
        _, valid = lattice_translate(chart, off, side)
        keep &= valid
    return keep.reshape(chart.shape)


# --- operator ------------------------------------------------------------

def _forward_differences(chart: GridChart, side: str) -> List[csr_matrix]:
    n = chart.model.dimension
    rank = chart.model.horizontal_rank
    spacing = chart.spacing
    nodes = np.arange(chart.size)
    mats = []
    for i in range(rank):
        target, valid = lattice_translate(chart, _unit(n, i), side)
        src = nodes[valid]
        dst = target[valid]
        keep = src != dst
        src, dst = src[keep], dst[keep]
        rows = np.arange(src.size)
        h = spacing[i]
        data = np.concatenate([np.full(src.size, -1.0 / h), np.full(src.size, 1.0 / h)])
        mats.append(csr_matrix((data, (np.concatenate([rows, rows]), np.concatenate([src, dst]))),
                               shape=(src.size, chart.size)))
    return mats


def _assemble_generator(chart: GridChart, side: str) -> csr_matrix:
    diffs = _forward_differences(chart, side)
    stacked = vstack(diffs).tocsr()
    return (-(stacked.T @ stacked)).tocsr()


@dataclass
class HeatOperator:
    """The assembled sub-Laplacian of a chart.

    Attributes:
        chart: the grid chart
        matrix: sparse L (left-invariant, built from right translations)
        differences: forward differences D_i with L = -sum D_i^T D_i
        symmetrized: always True for this assembly
    """
    chart: GridChart
    matrix: csr_matrix
    differences: List[csr_matrix]
    symmetrized: bool = True
    _right_matrix: Optional[csr_matrix] = field(default=None, repr=False)
    _cn_cache: Dict[float, Tuple[csr_matrix, csr_matrix]] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def assemble(cls, chart: GridChart) -> "HeatOperator":
        diffs = _forward_differences(chart, "right")
        stacked = vstack(diffs).tocsr()
        matrix = (-(stacked.T @ stacked)).tocsr()
        debug_log(f"assembled heat operator: {chart.describe()}, nnz={matrix.nnz}")
        return cls(chart, matrix, diffs)

    @property
    def right_invariant_matrix(self) -> csr_matrix:
        """Generator built from left translations (the right-invariant sub-Laplacian)."""
        with self._lock:
            if self._right_matrix is None:
                self._right_matrix = _assemble_generator(self.chart, "left")
            return self._right_matrix

    @property
    def max_diagonal(self) -> float:
        return float(np.max(np.abs(self.matrix.diagonal())))

    @property
    def stability_dt(self) -> float:
        """Largest CN step keeping I + dt/2 L entrywise nonnegative."""
        return 2.0 / self.max_diagonal

    def apply(self, values: np.ndarray, right_invariant: bool = False) -> np.ndarray:
        mat = self.right_invariant_matrix if right_invariant else self.matrix
        flat = np.asarray(values, dtype=float).reshape(-1)
        return (mat @ flat).reshape(self.chart.shape)

    def crank_nicolson(self, step: float) -> Tuple[csr_matrix, csr_matrix]:
        """(I - step/2 L, I + step/2 L), cached per step size."""
        with self._lock:
            pair = self._cn_cache.get(step)
            if pair is None:
                eye = sparse_identity(self.chart.size, format="csr")
                half = 0.5 * step * self.matrix
                pair = ((eye - half).tocsr(), (eye + half).tocsr())
                if len(self._cn_cache) >= CN_CACHE_SIZE:
                    self._cn_cache.pop(next(iter(self._cn_cache)))
                self._cn_cache[step] = pair
            return pair


def _check_chart(op: HeatOperator, f: ScalarField) -> None:
    if f.chart != op.chart:
        raise InvalidInputError("field and operator live on different charts")


def sublaplacian_apply(op: HeatOperator, f: F) -> ScalarField:
    """Discrete sub-Laplacian of f."""
    _check_chart(op, f)
    return ScalarField(op.chart, op.apply(f.values))


# --- carre du champ ------------------------------------------------------

@lru_cache(maxsize=32)
def _neighbours(chart: GridChart, side: str):
    n = chart.model.dimension
    out = []
    for i in range(chart.model.horizontal_rank):
        fwd = lattice_translate(chart, _unit(n, i, 1), side)
        bwd = lattice_translate(chart, _unit(n, i, -1), side)
        out.append((fwd, bwd))
    return out


def horizontal_gradient(op: HeatOperator, f: ScalarField,
                        right_invariant: bool = False) -> List[np.ndarray]:
    """Centred differences X_i f along the lattice, one-sided at the walls.

    The left-invariant frame uses right translations; the right-invariant
    frame uses left translations.
    """
    _check_chart(op, f)
    side = "left" if right_invariant else "right"
    flat = f.flat
    grads = []
    for i, ((t_f, v_f), (t_b, v_b)) in enumerate(_neighbours(op.chart, side)):
        h = op.chart.spacing[i]
        fwd = flat[t_f]
        bwd = flat[t_b]
        centred = (fwd - bwd) / (2.0 * h)
        forward = (fwd - flat) / h
        backward = (flat - bwd) / h
        g = np.where(v_f & v_b, centred, np.where(v_f, forward, np.where(v_b, backward, 0.0)))
        grads.append(g.reshape(op.chart.shape))
    return grads


def carre_du_champ(op: HeatOperator, f: ScalarField, g: Optional[ScalarField] = None,
                   scheme: str = "centered", right_invariant: bool = False) -> ScalarField:
    """Gamma(f, g); Gamma(f) when g is omitted.

    Args:
        scheme: "centered" sums products of centred horizontal differences;
            "generator" uses (L(fg) - f Lg - g Lf) / 2
        right_invariant: use the right-invariant frame instead
    """
    g = f if g is None else g
    _check_chart(op, g)
    if scheme == "centered":
        gf = horizontal_gradient(op, f, right_invariant)
        gg = gf if g is f else horizontal_gradient(op, g, right_invariant)
        vals = sum(a * b for a, b in zip(gf, gg))
    elif scheme == "generator":
        _check_chart(op, f)
        fv, gv = f.values, g.values
        vals = 0.5 * (op.apply(fv * gv, right_invariant) - fv * op.apply(gv, right_invariant)
                      - gv * op.apply(fv, right_invariant))
    else:
        raise InvalidInputError(f"unknown carre du champ scheme {scheme!r}")
    return ScalarField(op.chart, vals)


def dirichlet_energy(op: HeatOperator, f: ScalarField) -> float:
    """-<f, Lf> times the cell volume; equals the sum of generator-scheme Gamma."""
    _check_chart(op, f)
    return float(-np.dot(f.flat, op.apply(f.values).reshape(-1)) * op.chart.cell_volume)


# --- time stepping -------------------------------------------------------

def _step_plan(op: HeatOperator, t: float, dt: Optional[float]) -> Tuple[int, float]:
    if t < 0:
        raise InvalidInputError(f"time must be nonnegative, got {t}")
    budget = op.stability_dt
    dt = budget if dt is None else float(dt)
    if dt <= 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if dt > budget * (1.0 + 1e-12):
        raise InvalidInputError(f"dt={dt:.4g} exceeds the stability budget {budget:.4g}")
    if t == 0:
        return 0, 0.0
    n = max(1, int(np.ceil(t / dt - 1e-9)))
    return n, t / n


def _advance(op: HeatOperator, u: np.ndarray, t: float, dt: Optional[float]) -> np.ndarray:
    n, step = _step_plan(op, t, dt)
    if n == 0:
        return u.copy()
    lhs, rhs = op.crank_nicolson(step)
    for k in range(n):
        b = rhs @ u
        u, info = cg(lhs, b, x0=b, rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXITER)
        if info != 0:
            residual = float(np.linalg.norm(lhs @ u - b) / max(np.linalg.norm(b), 1e-300))
            raise NumericalError(
                f"conjugate gradients did not converge at step {k + 1}/{n}",
                {"info": int(info), "step": k + 1, "steps": n, "dt": step,
                 "relative_residual": residual})
    return u


def heat_evolve(op: HeatOperator, f: F, t: float, dt: Optional[float] = None) -> F:
    """Crank-Nicolson evolution of df/dt = Lf up to time t.

    dt defaults to the stability budget; the actual step is t/n with
    n = ceil(t/dt) steps.
    """
    _check_chart(op, f)
    out = _advance(op, f.flat.copy(), float(t), dt)
    return f.with_values(out)


def heat_evolve_series(op: HeatOperator, f: F, times: Sequence[float],
                       dt: Optional[float] = None) -> List[F]:
    """Evolutions of f to each of the nondecreasing times, stepping incrementally."""
    _check_chart(op, f)
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
        raise InvalidInputError("times must be nonnegative and nondecreasing")
    out, u, now = [], f.flat.copy(), 0.0
    for t in times:
        u = _advance(op, u, t - now, dt)
        now = t
        out.append(f.with_values(u))
    return out


def delta_density(chart: GridChart, x0: GroupPoint, init: str = "cell") -> DensityField:
    """Discrete Dirac mass at x0.

    init="cell" puts mass 1 on the nearest cell; init="bump" uses a Gaussian
    of width two spacings around that node.
    """
    idx = chart.locate(x0)
    if init == "cell":
        masses = np.zeros(chart.shape)
        masses[idx] = 1.0
        return DensityField.from_mass(chart, masses)
    if init == "bump":
        centre = chart.nodes()[idx]
        diff = chart.nodes() - centre
        if chart.model.is_torus:
            periods = np.asarray(chart.model.periods)
            diff = diff - periods * np.round(diff / periods)
        width = 2.0 * chart.spacing
        weights = np.exp(-0.5 * np.sum((diff / width) ** 2, axis=-1))
        return DensityField.from_mass(chart, weights / weights.sum())
    raise InvalidInputError(f"unknown delta initialization {init!r}")


def heat_kernel(op: HeatOperator, x0: GroupPoint, t: float, init: str = "cell",
                dt: Optional[float] = None) -> DensityField:
    """Discrete p_t[x0]: the evolved Dirac mass at x0."""
    if t <= 0:
        raise InvalidInputError("heat kernel time must be positive")
    return heat_evolve(op, delta_density(op.chart, x0, init), t, dt)


def dual_heat_on_measure(op: HeatOperator, mu: DensityField, t: float,
                         dt: Optional[float] = None) -> DensityField:
    """H_t mu for a probability density mu."""
    if abs(mu.mass - 1.0) > 1e-6:
        raise InvalidInputError(f"measure has mass {mu.mass:.8g}, expected 1")
    return heat_evolve(op, mu, t, dt)


# --- semigroup mollification ---------------------------------------------

@dataclass(frozen=True)
class BumpKernel:
    """Smooth compactly supported kernel exp(-1/((r-a)(b-r))) on (a, b)."""
    a: float = 0.5
    b: float = 1.5
    nodes: int = 64

    def __post_init__(self):
        if not (0 < self.a < self.b) or self.nodes < 4:
            raise InvalidInputError("bump kernel needs 0 < a < b and at least 4 nodes")

    def _gap(self, r: np.ndarray) -> np.ndarray:
        return (r - self.a) * (self.b - r)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        g = self._gap(r)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(g > 0, np.exp(-1.0 / np.where(g > 0, g, 1.0)), 0.0)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        g = self._gap(r)
        safe = np.where(g > 0, g, 1.0)
        return np.where(g > 0, self(r) * (self.a + self.b - 2.0 * r) / (safe * safe), 0.0)

    def quadrature(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes r_q with weights for kappa and kappa', normalized by sum(w kappa)."""
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        half = 0.5 * (self.b - self.a)
        r = 0.5 * (self.a + self.b) + half * x
        w = w * half
        wk = w * self(r)
        z = wk.sum()
        return r, wk / z, w * self.derivative(r) / z


def _mollifier_samples(op: HeatOperator, f: ScalarField, eps: float,
                       kernel: BumpKernel, dt: Optional[float]):
    if eps <= 0:
        raise InvalidInputError("mollification scale must be positive")
    r, wk, wdk = kernel.quadrature()
    samples = heat_evolve_series(op, f, eps * r, dt)
    return np.stack([s.values for s in samples]), wk, wdk


def mollify_semigroup(op: HeatOperator, f: F, eps: float,
                      kernel: Optional[BumpKernel] = None, dt: Optional[float] = None) -> F:
    """h^eps f = int P_{eps r} f kappa(r) dr by Gauss-Legendre quadrature."""
    _check_chart(op, f)
    values, wk, _ = _mollifier_samples(op, f, eps, kernel or BumpKernel(), dt)
    return f.with_values(np.tensordot(wk, values, axes=1))


def mollifier_laplacian_identity(op: HeatOperator, f: ScalarField, eps: float,
                                 kernel: Optional[BumpKernel] = None,
                                 dt: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Both sides of L(h^eps f) = -(1/eps) int P_{eps r} f kappa'(r) dr."""
    _check_chart(op, f)
    values, wk, wdk = _mollifier_samples(op, f, eps, kernel or BumpKernel(), dt)
    smoothed = np.tensordot(wk, values, axes=1)
    lhs = op.apply(smoothed)
    rhs = -np.tensordot(wdk, values, axes=1) / eps
    return lhs, rhs
