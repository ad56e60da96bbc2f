"""Boundary representations and distance/closest-point queries.

Walks need exactly one geometric answer: the largest ball around a point
that stays inside the domain, plus the closest boundary point once the
walk reaches the epsilon shell. Scenes are either analytic signed
distance trees (with CSG) or discrete boundaries (2D polylines, 3D
triangle meshes) behind a BVH.
"""

from .bvh import BVH
from .discrete import PolylineSet, TriangleMesh, load_obj, load_polyline
from .scene import (BoundaryQuery, OutsideDomainError, Scene, boundary_point,
                    distance_to_boundary, in_epsilon_shell)
from .sdf import (
    BoxSDF,
    DifferenceSDF,
    IntersectionSDF,
    PlaneSDF,
    SDFNode,
    SmoothUnionSDF,
    SphereSDF,
    TransformedSDF,
    UnionSDF,
)

__all__ = [
    "BVH",
    "BoundaryQuery",
    "BoxSDF",
    "DifferenceSDF",
    "IntersectionSDF",
    "OutsideDomainError",
    "PlaneSDF",
    "PolylineSet",
    "SDFNode",
    "Scene",
    "SmoothUnionSDF",
    "SphereSDF",
    "TransformedSDF",
    "TriangleMesh",
    "UnionSDF",
    "boundary_point",
    "distance_to_boundary",
    "in_epsilon_shell",
    "load_obj",
    "load_polyline",
]
