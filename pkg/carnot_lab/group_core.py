"""Exact group algebra for the supported models.

Points are float arrays whose last axis holds exponential coordinates;
every operation broadcasts over the leading axes. On H^1 the group law is

    (x1, y1, z1) . (x2, y2, z2) = (x1 + x2, y1 + y2, z1 + z2 + (x1*y2 - y1*x2)/2)

and on the abelian models it is the componentwise sum (mod periods on the
torus).
"""
from typing import List, Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError
from .types import GroupModel, GroupPoint


def as_points(model: GroupModel, a: Sequence[float]) -> np.ndarray:
    """Validate and convert coordinates; torus coordinates are reduced mod periods."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != model.dimension:
        raise InvalidInputError(
            f"expected {model.dimension} coordinates, got shape {arr.shape}")
    if model.is_torus:
        arr = reduce_torus(model, arr)
    return arr


def reduce_torus(model: GroupModel, a: np.ndarray) -> np.ndarray:
    periods = np.asarray(model.periods)
    out = np.mod(a, periods)
    # mod can return the period itself for tiny negative inputs
    return np.where(out >= periods, out - periods, out)


def identity(model: GroupModel) -> GroupPoint:
    return np.zeros(model.dimension)


def multiply(model: GroupModel, a: GroupPoint, b: GroupPoint) -> GroupPoint:
    """Group product a . b."""
    a = as_points(model, a)
    b = as_points(model, b)
    a, b = np.broadcast_arrays(a, b)
    out = a + b
    if model.is_heisenberg:
        out = out.copy()
        out[..., 2] += 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    elif model.is_torus:
        out = reduce_torus(model, out)
    return out


def inverse(model: GroupModel, a: GroupPoint) -> GroupPoint:
    """Group inverse; in exponential coordinates this is negation."""
    a = as_points(model, a)
    out = -a
    if model.is_torus:
        out = reduce_torus(model, out)
    return out + 0.0


def dilate(model: GroupModel, lam: float, a: GroupPoint) -> GroupPoint:
    """Homogeneous dilation delta_lam."""
    if model.is_torus:
        raise UnsupportedOperationError("dilations are undefined on the torus")
    if lam < 0:
        raise InvalidInputError(f"dilation factor must be nonnegative, got {lam}")
    a = as_points(model, a)
    factors = float(lam) ** np.asarray(model.degrees, dtype=float)
    return a * factors


def horizontal_frame(model: GroupModel, a: GroupPoint,
                     right_invariant: bool = False) -> List[np.ndarray]:
    """Horizontal frame evaluated at a.

    On H^1 the left-invariant frame is X1 = (1, 0, -y/2), X2 = (0, 1, x/2);
    the right-invariant one is X1~ = (1, 0, y/2), X2~ = (0, 1, -x/2).
    Abelian models return the standard basis.

    Returns:
        list of arrays shaped like a, one per generator
    """
    a = as_points(model, a)
    if not model.is_heisenberg:
        frame = []
        for i in range(model.dimension):
            e = np.zeros_like(a)
            e[..., i] = 1.0
            frame.append(e)
        return frame
    sign = -1.0 if right_invariant else 1.0
    x, y = a[..., 0], a[..., 1]
    x1 = np.zeros_like(a)
    x1[..., 0] = 1.0
    x1[..., 2] = -0.5 * sign * y
    x2 = np.zeros_like(a)
    x2[..., 1] = 1.0
    x2[..., 2] = 0.5 * sign * x
    return [x1, x2]


def translation_jacobian(model: GroupModel, a: GroupPoint, side: str = "left") -> np.ndarray:
    """Jacobian matrix of p -> a.p (side="left") or p -> p.a (side="right")."""
    if side not in ("left", "right"):
        raise InvalidInputError(f"side must be 'left' or 'right', got {side!r}")
    a = as_points(model, a)
    jac = np.eye(model.dimension)
    if model.is_heisenberg:
        sign = 1.0 if side == "left" else -1.0
        jac[2, 0] = -0.5 * sign * a[1]
        jac[2, 1] = 0.5 * sign * a[0]
    return jac


def dilated_box_volume(model: GroupModel, lam: float, lo: Sequence[float],
                       hi: Sequence[float]) -> float:
    """Lebesgue volume of delta_lam applied to the axis box [lo, hi]."""
    corners_lo = dilate(model, lam, lo)
    corners_hi = dilate(model, lam, hi)
    return float(np.prod(np.abs(corners_hi - corners_lo)))


def rotate_xy(a: GroupPoint, theta: float) -> GroupPoint:
    """Rotation of H^1 about the vertical axis (an isometry and automorphism)."""
    a = np.asarray(a, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = a.copy()
    out[..., 0] = c * a[..., 0] - s * a[..., 1]
    out[..., 1] = s * a[..., 0] + c * a[..., 1]
    return out
