"""Scene: one boundary representation plus the queries walks ask of it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdf as _sdf
from .discrete import PolylineSet, TriangleMesh
from .sdf import SDFNode


class OutsideDomainError(ValueError):
    """Query point is not inside the domain."""


@dataclass(frozen=True)
class BoundaryQuery:
    d: float
    xbar: np.ndarray


@dataclass(frozen=True)
class Scene:
    dim: int
    boundary: object
    epsilon: float
    scale: float = field(init=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        b = self.boundary
        if isinstance(b, SDFNode):
            scale = float(b.bound_radius())
        elif isinstance(b, (PolylineSet, TriangleMesh)):
            if b.dim != self.dim:
                raise ValueError(f"boundary is {b.dim}D but scene.dim is {self.dim}")
            scale = b.scale()
        else:
            raise TypeError("boundary must be an SDF tree, PolylineSet, or TriangleMesh")
        object.__setattr__(self, "scale", max(scale, 1e-12))

    @property
    def fd_step(self) -> float:
        return 1e-5 * self.scale

    def inside(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if isinstance(self.boundary, SDFNode):
            return self.boundary.value(x) < 0.0
        return self.boundary.inside(x)


def distance_to_boundary(scene: Scene, x) -> BoundaryQuery:
    """Radius of an empty ball around x and the closest boundary point.

    Exact for discrete boundaries; for SDF trees the distance is the
    conservative |sdf| bound and the closest point comes from projecting
    along the numeric gradient.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (scene.dim,):
        raise ValueError(f"point shape {x.shape} does not match scene dim {scene.dim}")
    b = scene.boundary
    if isinstance(b, SDFNode):
        sd = b.value(x)
        if sd >= 0.0:
            raise OutsideDomainError(f"signed distance {sd} >= 0 at {x}")
        xbar = _sdf.project_to_surface(b, x, scene.fd_step)
        return BoundaryQuery(d=-sd, xbar=xbar)
    if not b.inside(x):
        raise OutsideDomainError(f"{x} fails the ray-parity inside test")
    d, _, point = b.closest(x)
    if d <= 0.0:
        raise OutsideDomainError(f"{x} lies on the boundary")
    return BoundaryQuery(d=d, xbar=point)


def in_epsilon_shell(scene: Scene, x) -> tuple[bool, BoundaryQuery]:
    """Strictly-less test against scene.epsilon, plus the boundary point."""
    q = distance_to_boundary(scene, x)
    return q.d < scene.epsilon, q


def boundary_point(scene: Scene, x) -> np.ndarray:
    """Closest boundary point regardless of which side x lies on.

    Walks use this when a step lands outside the domain (an SDE exit, or
    a sphere point pushed across the boundary by rounding) and the
    inside-only distance query would refuse the point.
    """
    x = np.asarray(x, dtype=float)
    b = scene.boundary
    if isinstance(b, SDFNode):
        return _sdf.project_to_surface(b, x, scene.fd_step)
    _, _, point = b.closest(x)
    return point
