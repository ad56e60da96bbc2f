"""Signed distance trees: primitives, CSG combinations, rigid transforms.

Sign convention: negative inside, positive outside. Primitives return
exact signed distance; min/max CSG makes the magnitude a conservative
lower bound of the true distance, which is all a walk needs (an empty
ball, not the largest one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _norm(v) -> float:
    """Euclidean length with a pinned accumulation order.

    Distance queries run on every walk step and must agree bit for bit
    with the compiled backend, so the reduction is spelled out instead
    of delegated to a BLAS call that may reassociate or fuse.
    """
    s = 0.0
    for i in range(len(v)):
        s += float(v[i]) * float(v[i])
    return math.sqrt(s)


class SDFNode:
    def value(self, p: np.ndarray) -> float:
        raise NotImplementedError

    def bound_radius(self) -> float:
        """Radius of an origin-centered sphere enclosing the surface."""
        raise NotImplementedError


@dataclass(frozen=True)
class SphereSDF(SDFNode):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0.0:
            raise ValueError("sphere radius must be positive")

    def value(self, p):
        s = 0.0
        for i in range(len(p)):
            d = float(p[i]) - float(self.center[i])
            s += d * d
        return math.sqrt(s) - self.radius

    def bound_radius(self):
        return float(np.linalg.norm(self.center)) + self.radius


@dataclass(frozen=True)
class BoxSDF(SDFNode):
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if not np.all(self.half_extents > 0.0):
            raise ValueError("box half extents must be positive")

    def value(self, p):
        out_sq = 0.0
        q_max = -math.inf
        for i in range(len(p)):
            q = abs(float(p[i]) - float(self.center[i])) - float(self.half_extents[i])
            if q > q_max:
                q_max = q
            if q > 0.0:
                out_sq += q * q
        return math.sqrt(out_sq) + min(q_max, 0.0)

    def bound_radius(self):
        return float(np.linalg.norm(self.center)) + float(np.linalg.norm(self.half_extents))


@dataclass(frozen=True)
class PlaneSDF(SDFNode):
    """Half space: inside is the side the normal points away from."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0.0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)

    def value(self, p):
        s = 0.0
        for i in range(len(p)):
            s += (float(p[i]) - float(self.point[i])) * float(self.normal[i])
        return s

    def bound_radius(self):
        # unbounded; contributes only its offset to the scene scale
        return float(np.linalg.norm(self.point)) + 1.0


@dataclass(frozen=True)
class UnionSDF(SDFNode):
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("union needs at least two children")
        object.__setattr__(self, "children", tuple(self.children))

    def value(self, p):
        return min(c.value(p) for c in self.children)

    def bound_radius(self):
        return max(c.bound_radius() for c in self.children)


@dataclass(frozen=True)
class IntersectionSDF(SDFNode):
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("intersection needs at least two children")
        object.__setattr__(self, "children", tuple(self.children))

    def value(self, p):
        return max(c.value(p) for c in self.children)

    def bound_radius(self):
        return min(c.bound_radius() for c in self.children)


@dataclass(frozen=True)
class DifferenceSDF(SDFNode):
    base: SDFNode
    cut: SDFNode

    def value(self, p):
        return max(self.base.value(p), -self.cut.value(p))

    def bound_radius(self):
        return self.base.bound_radius()


@dataclass(frozen=True)
class SmoothUnionSDF(SDFNode):
    """Polynomial smooth minimum with blend width k; conservative only."""

    a: SDFNode
    b: SDFNode
    k: float

    def __post_init__(self):
        if not self.k > 0.0:
            raise ValueError("blend width k must be positive")

    def value(self, p):
        da, db = self.a.value(p), self.b.value(p)
        h = min(max(0.5 + 0.5 * (db - da) / self.k, 0.0), 1.0)
        return db * (1.0 - h) + da * h - self.k * h * (1.0 - h)

    def bound_radius(self):
        return max(self.a.bound_radius(), self.b.bound_radius()) + self.k


@dataclass(frozen=True)
class TransformedSDF(SDFNode):
    """Rigid motion p -> R p + t applied to the child's surface."""

    child: SDFNode
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if R.shape[0] != R.shape[1] or not np.allclose(R @ R.T, np.eye(R.shape[0]), atol=1e-10):
            raise ValueError("rotation must be orthogonal")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def value(self, p):
        n = len(p)
        local = np.empty(n)
        for i in range(n):
            s = 0.0
            for j in range(n):
                # R^T row i is column i of R
                s += float(self.rotation[j, i]) * (float(p[j]) - float(self.translation[j]))
            local[i] = s
        return self.child.value(local)

    def bound_radius(self):
        return self.child.bound_radius() + float(np.linalg.norm(self.translation))


def gradient(node: SDFNode, p: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of the signed distance."""
    p = np.asarray(p, dtype=float)
    g = np.empty(p.shape[0])
    for ax in range(p.shape[0]):
        e = np.zeros(p.shape[0])
        e[ax] = step
        g[ax] = (node.value(p + e) - node.value(p - e)) / (2.0 * step)
    return g


def project_to_surface(node: SDFNode, p: np.ndarray, step: float) -> np.ndarray:
    """One projection along the numeric gradient plus one refinement."""
    x = np.asarray(p, dtype=float)
    for _ in range(2):
        d = node.value(x)
        g = gradient(node, x, step)
        gn = _norm(g)
        if gn < 1e-12:
            break
        x = x - d * g / gn
    return x


def _rotation_2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _rotation_3d(axis, angle: float) -> np.ndarray:
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = ax
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) * c + s * K + (1.0 - c) * np.outer(ax, ax)


def rotation(dim: int, angle: float, axis=None) -> np.ndarray:
    """Rotation matrix helper for scene files: 2D angle or 3D axis-angle."""
    if dim == 2:
        return _rotation_2d(angle)
    if axis is None:
        raise ValueError("3D rotation needs an axis")
    return _rotation_3d(axis, angle)
