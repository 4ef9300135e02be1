"""Carnot-Caratheodory distance and geodesics.

Two independent oracles are provided for H^1:

- ClosedForm: the arc-angle parametrization of geodesics. A geodesic from
  the origin projects to a circular arc of turning angle phi in the xy-plane;
  phi solves (phi - sin phi) r^2 = 4|z| (1 - cos phi) with r = |(x, y)|.
- HorizontalGraph: Dijkstra on the discrete Heisenberg lattice
  {x, y in hZ, z in (h^2/2)Z}. Every lattice edge is a straight horizontal
  segment, so every lattice path is an admissible curve and the graph value
  bounds the distance from above.

Abelian models always use the Euclidean (or shortest modular) formula.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import InvalidInputError
from .group_core import as_points, inverse, multiply, reduce_torus
from .memory import get_diagnostics
from .types import GroupModel, GroupPoint
from .utils import debug_log

TWO_PI = 2.0 * np.pi

# Horizontal lattice moves: axis, diagonal and knight directions.
STENCIL_8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))
STENCIL_16 = STENCIL_8 + ((1, 2), (2, 1), (-1, 2), (-2, 1),
                          (1, -2), (2, -1), (-1, -2), (-2, -1))


class Method(str, Enum):
    CLOSED_FORM = "closed_form"
    HORIZONTAL_GRAPH = "horizontal_graph"


@dataclass(frozen=True)
class MetricOracle:
    """How Heisenberg distances are evaluated."""
    method: Method = Method.CLOSED_FORM
    graph_resolution: int = 32
    root_tolerance: float = 1e-10
    stencil: int = 16

    def __post_init__(self):
        if self.graph_resolution < 8:
            raise InvalidInputError("graph_resolution must be >= 8")
        if not (0 < self.root_tolerance <= 1e-3):
            raise InvalidInputError("root_tolerance must lie in (0, 1e-3]")
        if self.stencil not in (8, 16):
            raise InvalidInputError("stencil must be 8 or 16 directions")

    @property
    def bisection_steps(self) -> int:
        return max(30, int(np.ceil(np.log2(TWO_PI / self.root_tolerance))) + 4)


@dataclass
class PathPolyline:
    """Ordered sample points of a curve and the sum of their horizontal chords."""
    points: np.ndarray
    length: float = field(default=0.0)

    @classmethod
    def from_points(cls, model: GroupModel, points: np.ndarray) -> "PathPolyline":
        pts = np.asarray(points, dtype=float)
        return cls(pts, polyline_length(model, pts))


def polyline_length(model: GroupModel, points: np.ndarray) -> float:
    diffs = np.diff(np.asarray(points, dtype=float), axis=0)
    if model.is_torus:
        periods = np.asarray(model.periods)
        diffs = diffs - periods * np.round(diffs / periods)
    horizontal = diffs[:, :model.horizontal_rank]
    return float(np.sum(np.linalg.norm(horizontal, axis=1)))


# --- closed form ---------------------------------------------------------

def _theta_minus_sin(theta: np.ndarray) -> np.ndarray:
    """theta - sin(theta) without cancellation near zero."""
    theta = np.asarray(theta, dtype=float)
    t2 = theta * theta
    series = theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    return np.where(np.abs(theta) < 1e-2, series, theta - np.sin(theta))


def _one_minus_cos(theta: np.ndarray) -> np.ndarray:
    s = np.sin(0.5 * theta)
    return 2.0 * s * s


def arc_angle(r2: np.ndarray, az: np.ndarray, steps: int) -> np.ndarray:
    """Turning angle in [0, 2*pi] of the geodesic from o to a point with |xy|^2=r2, |z|=az.

    Bisection on the sign of (phi - sin phi) r2 - 4 az (1 - cos phi), which is
    negative below the root and positive above it.
    """
    r2, az = np.broadcast_arrays(np.asarray(r2, dtype=float), np.asarray(az, dtype=float))
    lo = np.zeros(r2.shape)
    hi = np.full(r2.shape, TWO_PI)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        val = _theta_minus_sin(mid) * r2 - 4.0 * az * _one_minus_cos(mid)
        below = val < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _closed_form_from_origin(p: np.ndarray, oracle: MetricOracle) -> Tuple[np.ndarray, np.ndarray]:
    """Distances d(o, p) and a mask of entries whose root was bracketed."""
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y
    az = np.abs(z)
    finite = np.isfinite(r2) & np.isfinite(az)
    r2f = np.where(finite, r2, 0.0)
    azf = np.where(finite, az, 0.0)
    phi = arc_angle(r2f, azf, oracle.bisection_steps)
    r = np.sqrt(r2f)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_small = r / np.sinc(phi / TWO_PI)
        d_large = phi * np.sqrt(2.0 * azf / _theta_minus_sin(phi))
    d = np.where(phi <= 0.5 * np.pi, d_small, d_large)
    d = np.where(azf == 0.0, r, d)
    d = np.where(r2f == 0.0, np.sqrt(4.0 * np.pi * azf), d)
    # at phi = 2*pi the bracket is valid iff r2 > 0 or the point is vertical
    bracketed = finite & np.isfinite(d)
    return d, bracketed


# --- graph oracle --------------------------------------------------------

def _lattice_dijkstra(r: float, z: float, bound: float, resolution: int,
                      moves: Tuple[Tuple[int, int], ...]) -> float:
    """Shortest lattice path from o to (r, 0, z) inside the region reachable with length <= bound."""
    if r > 0:
        n_r = max(1, int(round(resolution * r / bound)))
        h = r / n_r
    else:
        n_r = 0
        h = bound / resolution
    hz = 0.5 * h * h
    target_k = int(round(z / hz))

    # any curve of length <= bound from o to (r, 0, .) stays in this ellipse box
    i_lo = int(np.floor((r - bound) / (2.0 * h))) - 1
    i_hi = int(np.ceil((r + bound) / (2.0 * h))) + 1
    half_y = 0.5 * np.sqrt(max(bound * bound - r * r, 0.0))
    j_hi = int(np.ceil(half_y / h)) + 1
    k_hi = int(np.ceil(bound * bound / (4.0 * np.pi * hz))) + 1
    k_hi = max(k_hi, abs(target_k) + 1)

    ii = np.arange(i_lo, i_hi + 1)
    jj = np.arange(-j_hi, j_hi + 1)
    kk = np.arange(-k_hi, k_hi + 1)
    nx, ny, nz = ii.size, jj.size, kk.size
    grid_i, grid_j, grid_k = np.meshgrid(ii, jj, kk, indexing="ij")
    grid_i = grid_i.ravel()
    grid_j = grid_j.ravel()
    grid_k = grid_k.ravel()
    index = np.arange(grid_i.size, dtype=np.int64)

    src_list, dst_list, w_list = [], [], []
    for a, b in moves:
        ti = grid_i + a
        tj = grid_j + b
        tk = grid_k + (grid_i * b - grid_j * a)
        ok = ((ti >= i_lo) & (ti <= i_hi) & (tj >= -j_hi) & (tj <= j_hi)
              & (tk >= -k_hi) & (tk <= k_hi))
        dst = ((ti[ok] - i_lo) * ny + (tj[ok] + j_hi)) * nz + (tk[ok] + k_hi)
        src_list.append(index[ok])
        dst_list.append(dst)
        w_list.append(np.full(dst.size, h * np.hypot(a, b)))
    n_nodes = nx * ny * nz
    graph = csr_matrix((np.concatenate(w_list),
                        (np.concatenate(src_list), np.concatenate(dst_list))),
                       shape=(n_nodes, n_nodes))
    source = ((0 - i_lo) * ny + j_hi) * nz + k_hi
    target = ((n_r - i_lo) * ny + j_hi) * nz + (target_k + k_hi)
    dist = dijkstra(graph, directed=True, indices=source, limit=1.25 * bound + 4.0 * h)
    debug_log(f"graph oracle: {n_nodes} nodes, h={h:.4g}, d={dist[target]:.6g}")
    return float(dist[target])


def graph_distance_from_origin(p: np.ndarray, oracle: MetricOracle) -> float:
    """Graph-oracle distance d(o, p) for a single H^1 point."""
    x, y, z = (float(v) for v in p)
    r = float(np.hypot(x, y))
    if r == 0.0 and z == 0.0:
        return 0.0
    moves = STENCIL_16 if oracle.stencil == 16 else STENCIL_8
    # go straight, then run a vertical loop: always an admissible curve
    upper = r + np.sqrt(4.0 * np.pi * abs(z))
    coarse = _lattice_dijkstra(r, z, upper, max(8, oracle.graph_resolution // 2), moves)
    bound = min(upper, coarse) * 1.1 if np.isfinite(coarse) else upper
    fine = _lattice_dijkstra(r, z, bound, oracle.graph_resolution, moves)
    return min(coarse, fine)


# --- public API ----------------------------------------------------------

@dataclass(frozen=True)
class CCMetric:
    """A group model together with the oracle used for its distances."""
    model: GroupModel
    oracle: MetricOracle = MetricOracle()

    def distance(self, a: GroupPoint, b: GroupPoint):
        return cc_distance(self.model, self.oracle, a, b)

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Distance matrix D[i, j] = d(xs[i], ys[j])."""
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        return np.asarray(cc_distance(self.model, self.oracle, xs[:, None, :], ys[None, :, :]))


def cc_distance(model: GroupModel, oracle: MetricOracle, a: GroupPoint, b: GroupPoint):
    """Carnot-Caratheodory distance, broadcast over leading axes.

    Returns a float for single points and an array otherwise.
    """
    a = as_points(model, a)
    b = as_points(model, b)
    if not model.is_heisenberg:
        diff = b - a
        if model.is_torus:
            periods = np.asarray(model.periods)
            diff = diff - periods * np.round(diff / periods)
        d = np.linalg.norm(diff, axis=-1)
    else:
        p = multiply(model, inverse(model, a), b)
        if oracle.method == Method.HORIZONTAL_GRAPH:
            flat = p.reshape(-1, 3)
            d = np.array([graph_distance_from_origin(q, oracle) for q in flat]).reshape(p.shape[:-1])
        else:
            d, ok = _closed_form_from_origin(p, oracle)
            if not np.all(ok):
                bad = np.argwhere(~ok)
                if not np.all(np.isfinite(p[~ok])):
                    raise InvalidInputError("distance requested between non-finite points")
                get_diagnostics().record("closed_form_fallback", len(bad))
                for idx in map(tuple, bad):
                    d[idx] = graph_distance_from_origin(p[idx], oracle)
    if np.ndim(d) == 0:
        return float(d)
    return d


def _origin_geodesic(p: np.ndarray, tau: np.ndarray, steps: int) -> np.ndarray:
    """Points at unit parameter tau on the geodesic from o to p (broadcast)."""
    p, tau = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(tau, dtype=float)[..., None])
    tau = tau[..., 0]
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    w = x + 1j * y
    r2 = x * x + y * y
    az = np.abs(z)
    phi = np.where(z < 0, -1.0, 1.0) * arc_angle(r2, az, steps)
    vertical = (r2 == 0.0) & (az > 0.0)
    straight = (az == 0.0) | (np.abs(phi) < 1e-12)

    safe_phi = np.where(straight, 1.0, phi)
    chord = np.sin(safe_phi) + 1j * _one_minus_cos(safe_phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        # chord = (e^{i phi} - 1)/i, so k = w * phi / chord
        k = np.where(straight | vertical, w, w * safe_phi / np.where(chord == 0, 1.0, chord))
    k = np.where(vertical, np.sqrt(4.0 * np.pi * az) + 0j, k)

    theta = safe_phi * tau
    c = k * (np.sin(theta) + 1j * _one_minus_cos(theta)) / safe_phi
    length2 = np.abs(k) ** 2
    zz = length2 * _theta_minus_sin(theta) / (2.0 * safe_phi * safe_phi)
    c = np.where(straight, w * tau, c)
    zz = np.where(straight, 0.0, zz)

    out = np.empty(p.shape)
    out[..., 0] = c.real
    out[..., 1] = c.imag
    out[..., 2] = zz
    return out


def geodesic_point(model: GroupModel, a: GroupPoint, b: GroupPoint, s,
                   oracle: Optional[MetricOracle] = None) -> np.ndarray:
    """Point at fraction s along the geodesic from a to b (broadcast over pairs)."""
    oracle = oracle or MetricOracle()
    a = as_points(model, a)
    b = as_points(model, b)
    s = np.asarray(s, dtype=float)
    if not model.is_heisenberg:
        diff = b - a
        if model.is_torus:
            periods = np.asarray(model.periods)
            diff = diff - periods * np.round(diff / periods)
        out = a + s[..., None] * diff
        return reduce_torus(model, out) if model.is_torus else out
    p = multiply(model, inverse(model, a), b)
    q = _origin_geodesic(p, s, oracle.bisection_steps)
    return multiply(model, a, q)


def cc_geodesic(model: GroupModel, a: GroupPoint, b: GroupPoint, samples: int,
                oracle: Optional[MetricOracle] = None) -> PathPolyline:
    """Constant-speed geodesic from a to b sampled at `samples` points."""
    if samples < 2:
        raise InvalidInputError("a geodesic polyline needs at least 2 samples")
    a = as_points(model, a)
    b = as_points(model, b)
    taus = np.linspace(0.0, 1.0, samples)
    pts = geodesic_point(model, np.broadcast_to(a, (samples, a.size)),
                         np.broadcast_to(b, (samples, b.size)), taus, oracle)
    pts[0] = a
    pts[-1] = b
    return PathPolyline.from_points(model, pts)
