"""Shared value types: group models, grid charts, fields and point clouds."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError

# A group point is a float array whose last axis holds the coordinates.
GroupPoint = np.ndarray


class Family(str, Enum):
    ABELIAN_BOX = "abelian_box"
    ABELIAN_TORUS = "abelian_torus"
    HEISENBERG1 = "heisenberg1"


class Boundary(str, Enum):
    REFLECTING = "reflecting"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class GroupModel:
    """The ambient group: family tag plus its graded structure.

    Use the factories `heisenberg()`, `box(n)` and `torus(periods)` rather
    than the constructor.
    """
    family: Family
    dimension: int
    step: int
    homogeneous_dimension: int
    periods: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidInputError(f"dimension must be positive, got {self.dimension}")
        if self.family == Family.HEISENBERG1:
            if (self.dimension, self.step, self.homogeneous_dimension) != (3, 2, 4):
                raise InvalidInputError("Heisenberg1 requires n=3, step=2, Q=4")
        elif self.step != 1 or self.homogeneous_dimension != self.dimension:
            raise InvalidInputError("abelian models have step 1 and Q = n")
        if (self.periods is not None) != (self.family == Family.ABELIAN_TORUS):
            raise InvalidInputError("periods are required for, and only for, the torus")
        if self.periods is not None:
            if len(self.periods) != self.dimension or min(self.periods) <= 0:
                raise InvalidInputError(f"invalid torus periods {self.periods}")

    @classmethod
    def heisenberg(cls) -> "GroupModel":
        return cls(Family.HEISENBERG1, 3, 2, 4)

    @classmethod
    def box(cls, n: int) -> "GroupModel":
        return cls(Family.ABELIAN_BOX, n, 1, n)

    @classmethod
    def torus(cls, periods: Sequence[float]) -> "GroupModel":
        periods = tuple(float(p) for p in periods)
        return cls(Family.ABELIAN_TORUS, len(periods), 1, len(periods), periods)

    @property
    def is_heisenberg(self) -> bool:
        return self.family == Family.HEISENBERG1

    @property
    def is_torus(self) -> bool:
        return self.family == Family.ABELIAN_TORUS

    @property
    def degrees(self) -> Tuple[int, ...]:
        """Dilation degree of each coordinate."""
        if self.is_heisenberg:
            return (1, 1, 2)
        return (1,) * self.dimension

    @property
    def horizontal_rank(self) -> int:
        """Number of horizontal generators."""
        return 2 if self.is_heisenberg else self.dimension

    @property
    def total_volume(self) -> float:
        """Haar measure of the whole group (finite only on the torus)."""
        if self.periods is None:
            return float("inf")
        return float(np.prod(self.periods))


@dataclass(frozen=True)
class GridChart:
    """A regular cell-centred grid over a group model.

    Node i along an axis sits at lo + (i + 1/2) * spacing. Heisenberg charts
    must be lattice-aligned: x and y nodes are integer multiples of h and z
    nodes are integer multiples of h^2/2, which `GridChart.heisenberg`
    guarantees.
    """
    model: GroupModel
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    shape: Tuple[int, ...]
    boundary: Boundary = Boundary.REFLECTING

    def __post_init__(self):
        n = self.model.dimension
        if not (len(self.lo) == len(self.hi) == len(self.shape) == n):
            raise InvalidInputError(f"chart extents must have length {n}")
        if min(self.shape) < 1:
            raise InvalidInputError(f"invalid chart shape {self.shape}")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise InvalidInputError("chart requires hi > lo on every axis")
        if (self.boundary == Boundary.PERIODIC) != self.model.is_torus:
            raise InvalidInputError("periodic boundary is used for, and only for, the torus")
        if self.model.is_heisenberg and not self.is_lattice_aligned:
            raise InvalidInputError(
                "Heisenberg charts must be lattice-aligned (hx = hy = h, hz = h^2/2)")

    # --- factories -------------------------------------------------------

    @classmethod
    def box(cls, model: GroupModel, lo: Sequence[float], hi: Sequence[float],
            shape: Sequence[int]) -> "GridChart":
        return cls(model, tuple(map(float, lo)), tuple(map(float, hi)),
                   tuple(int(s) for s in shape), Boundary.REFLECTING)

    @classmethod
    def torus(cls, model: GroupModel, shape: Sequence[int]) -> "GridChart":
        """Torus chart whose node 0 sits at the origin."""
        if not model.is_torus:
            raise InvalidInputError("torus chart needs an AbelianTorus model")
        shape = tuple(int(s) for s in shape)
        h = [p / s for p, s in zip(model.periods, shape)]
        lo = tuple(-0.5 * hh for hh in h)
        hi = tuple(p - 0.5 * hh for p, hh in zip(model.periods, h))
        return cls(model, lo, hi, shape, Boundary.PERIODIC)

    @classmethod
    def heisenberg(cls, spacing: float, half_nodes_xy: int, half_nodes_z: int,
                   model: Optional[GroupModel] = None) -> "GridChart":
        """Symmetric lattice chart with nodes -M*h..M*h (xy) and -Mz*hz..Mz*hz (z)."""
        if spacing <= 0 or half_nodes_xy < 1 or half_nodes_z < 1:
            raise InvalidInputError("spacing and half node counts must be positive")
        model = model or GroupModel.heisenberg()
        h = float(spacing)
        hz = 0.5 * h * h
        m, mz = int(half_nodes_xy), int(half_nodes_z)
        lo = (-(m + 0.5) * h, -(m + 0.5) * h, -(mz + 0.5) * hz)
        hi = ((m + 0.5) * h, (m + 0.5) * h, (mz + 0.5) * hz)
        return cls(model, lo, hi, (2 * m + 1, 2 * m + 1, 2 * mz + 1), Boundary.REFLECTING)

    # --- geometry --------------------------------------------------------

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    @property
    def radius(self) -> float:
        """Half of the smallest extent."""
        return 0.5 * float(np.min(np.asarray(self.hi) - np.asarray(self.lo)))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def lattice_origin(self) -> Tuple[int, ...]:
        """Lattice index (coordinate / spacing) of node 0 along each axis."""
        sp = self.spacing
        return tuple(int(round((l + 0.5 * s) / s)) for l, s in zip(self.lo, sp))

    @property
    def is_lattice_aligned(self) -> bool:
        sp = self.spacing
        for l, s in zip(self.lo, sp):
            k = (l + 0.5 * s) / s
            if abs(k - round(k)) > 1e-7:
                return False
        if self.model.is_heisenberg:
            h = sp[0]
            if abs(sp[1] - h) > 1e-9 * h or abs(sp[2] - 0.5 * h * h) > 1e-9 * h * h:
                return False
        return True

    def axes(self) -> list:
        """Node coordinates along each axis."""
        return [l + (np.arange(n) + 0.5) * s
                for l, n, s in zip(self.lo, self.shape, self.spacing)]

    def nodes(self) -> np.ndarray:
        """Node coordinates as an array of shape (*shape, n)."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1)

    def points(self) -> np.ndarray:
        """Node coordinates flattened to (size, n) in row-major order."""
        return self.nodes().reshape(-1, self.model.dimension)

    def lattice_indices(self) -> np.ndarray:
        """Integer lattice coordinates of every node, shape (size, n)."""
        grids = np.meshgrid(*[np.arange(n) + o for n, o in zip(self.shape, self.lattice_origin)],
                            indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.model.dimension)

    def locate(self, point: Sequence[float]) -> Tuple[int, ...]:
        """Multi-index of the node nearest to point."""
        p = np.asarray(point, dtype=float)
        if p.shape != (self.model.dimension,):
            raise InvalidInputError(f"point must have {self.model.dimension} coordinates")
        if self.model.is_torus:
            p = np.mod(p, np.asarray(self.model.periods))
        idx = np.floor((p - np.asarray(self.lo)) / self.spacing).astype(int)
        if self.model.is_torus:
            idx = np.mod(idx, np.asarray(self.shape))
        elif np.any(p < np.asarray(self.lo)) or np.any(p > np.asarray(self.hi)):
            raise InvalidInputError(f"point {p.tolist()} lies outside the chart")
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return tuple(int(i) for i in idx)

    def flat_index(self, idx: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def window_mask(self, fraction: float = 0.2) -> np.ndarray:
        """Boolean mask of nodes at distance >= fraction * extent from every wall.

        Periodic charts have no walls, so the whole chart is returned.
        """
        if self.boundary == Boundary.PERIODIC or fraction <= 0:
            return np.ones(self.shape, dtype=bool)
        mask = np.ones(self.shape, dtype=bool)
        for axis, coords in enumerate(self.axes()):
            lo, hi = self.lo[axis], self.hi[axis]
            margin = fraction * (hi - lo)
            ok = (coords >= lo + margin - 1e-12) & (coords <= hi - margin + 1e-12)
            view = [None] * len(self.shape)
            view[axis] = slice(None)
            mask &= ok[tuple(view)]
        return mask

    def coarsened(self, factor: int = 2) -> "GridChart":
        """A chart over (about) the same region with `factor` times the spacing."""
        if factor < 1:
            raise InvalidInputError("coarsening factor must be >= 1")
        if self.model.is_heisenberg:
            m = (self.shape[0] - 1) // 2
            mz = (self.shape[2] - 1) // 2
            return GridChart.heisenberg(self.spacing[0] * factor, max(1, m // factor),
                                        max(1, mz // (factor * factor)), self.model)
        shape = tuple(max(1, s // factor) for s in self.shape)
        if self.model.is_torus:
            return GridChart.torus(self.model, shape)
        return GridChart.box(self.model, self.lo, self.hi, shape)

    def describe(self) -> str:
        return (f"{self.model.family.value} shape={'x'.join(map(str, self.shape))} "
                f"h={np.array2string(self.spacing, precision=4)}")


@dataclass
class ScalarField:
    """A real function sampled on the nodes of a chart."""
    chart: GridChart
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.chart.size:
            raise InvalidInputError(
                f"field has {vals.size} values, chart has {self.chart.size} nodes")
        self.values = vals.reshape(self.chart.shape)
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("field values must be finite")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.chart.cell_volume)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return type(self)(self.chart, values)


@dataclass
class DensityField(ScalarField):
    """A nonnegative density with respect to the (unit-normalized) Haar measure."""

    def __post_init__(self):
        super().__post_init__()
        scale = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if np.min(self.values) < -1e-9 * max(scale, 1e-300):
            raise InvalidInputError("density values must be nonnegative")

    @property
    def mass(self) -> float:
        return self.integral()

    def normalized(self) -> "DensityField":
        m = self.mass
        if m <= 0:
            raise InvalidInputError("cannot normalize a density of zero mass")
        return DensityField(self.chart, self.values / m)

    @classmethod
    def from_mass(cls, chart: GridChart, masses: np.ndarray) -> "DensityField":
        """Density whose cell masses are `masses`."""
        return cls(chart, np.asarray(masses, dtype=float) / chart.cell_volume)


@dataclass
class PointCloudMeasure:
    """A weighted finite-support probability measure.

    Duplicate points are merged and zero weights dropped on construction.
    """
    model: GroupModel
    points: np.ndarray
    weights: np.ndarray
    normalize: bool = field(default=False, repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[1] != self.model.dimension or pts.shape[0] != w.size:
            raise InvalidInputError("points/weights shape mismatch")
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be nonnegative, finite and non-empty")
        if self.model.is_torus:
            pts = np.mod(pts, np.asarray(self.model.periods))
        total = float(w.sum())
        if self.normalize:
            if total <= 0:
                raise InvalidInputError("cannot normalize a measure of zero mass")
            w = w / total
        elif abs(total - 1.0) > 1e-10:
            raise InvalidInputError(f"weights sum to {total!r}, expected 1")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inverse.reshape(-1), weights=w, minlength=uniq.shape[0])
        self.points = uniq
        self.weights = merged
        self.normalize = False

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @classmethod
    def dirac(cls, model: GroupModel, point: Sequence[float]) -> "PointCloudMeasure":
        return cls(model, np.asarray(point, dtype=float).reshape(1, -1), np.ones(1))

    @classmethod
    def uniform(cls, model: GroupModel, points: np.ndarray) -> "PointCloudMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(model, pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))
