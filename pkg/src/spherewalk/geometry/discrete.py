"""Discrete boundaries: 2D polyline sets and 3D triangle meshes.

Both give exact closest points per element; inside/outside is a
ray-parity vote over three fixed generic directions, which survives
grazing and vertex-touching rays.
"""

from __future__ import annotations

import math

import numpy as np

from .bvh import BVH

# generic directions for parity rays: irrational angles, nothing axis-aligned
_RAY_DIRS_2D = np.array(
    [
        [math.cos(0.7231), math.sin(0.7231)],
        [math.cos(2.4183), math.sin(2.4183)],
        [math.cos(4.5267), math.sin(4.5267)],
    ]
)
_RAY_DIRS_3D = np.array(
    [
        [0.5260, 0.5070, 0.6828],
        [-0.6651, 0.7296, 0.1590],
        [0.3805, -0.2093, -0.9008],
    ]
)
_RAY_DIRS_3D /= np.linalg.norm(_RAY_DIRS_3D, axis=1)[:, None]


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return a
    t = float(np.dot(p - a, ab)) / denom
    # exact endpoints so queries nearest a shared vertex tie exactly and
    # the index tie-break below is decisive
    if t <= 0.0:
        return a
    if t >= 1.0:
        return b
    return a + t * ab


def _closest_on_triangle(p, a, b, c):
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = float(np.dot(ab, ap))
    d2 = float(np.dot(ac, ap))
    if d1 <= 0.0 and d2 <= 0.0:
        return a
    bp = p - b
    d3 = float(np.dot(ab, bp))
    d4 = float(np.dot(ac, bp))
    if d3 >= 0.0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return a + (d1 / (d1 - d3)) * ab
    cp = p - c
    d5 = float(np.dot(ab, cp))
    d6 = float(np.dot(ac, cp))
    if d6 >= 0.0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return a + (d2 / (d2 - d6)) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


class PolylineSet:
    """Closed loops of 2D segments behind a BVH."""

    dim = 2

    def __init__(self, loops: list[np.ndarray]):
        segs = []
        for loop in loops:
            pts = np.asarray(loop, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
                raise ValueError("each loop needs at least 3 points of shape (n, 2)")
            closed = np.vstack([pts, pts[:1]])
            for i in range(pts.shape[0]):
                segs.append((closed[i], closed[i + 1]))
        self.a = np.array([s[0] for s in segs])
        self.b = np.array([s[1] for s in segs])
        self.a.setflags(write=False)
        self.b.setflags(write=False)
        self.bvh = BVH(np.minimum(self.a, self.b), np.maximum(self.a, self.b))

    def __len__(self):
        return self.a.shape[0]

    def element_closest(self, i: int, x: np.ndarray) -> np.ndarray:
        return _closest_on_segment(x, self.a[i], self.b[i])

    def closest(self, x):
        return self.bvh.closest(np.asarray(x, dtype=float), self.element_closest)

    def closest_brute(self, x):
        x = np.asarray(x, dtype=float)
        best = (np.inf, -1, None)
        for i in range(len(self)):
            p = self.element_closest(i, x)
            d = float(np.linalg.norm(p - x))
            if d < best[0]:
                best = (d, i, p)
        return best

    def _segment_hit(self, i: int, o: np.ndarray, d: np.ndarray) -> int:
        a, b = self.a[i], self.b[i]
        e = b - a
        denom = d[0] * e[1] - d[1] * e[0]
        if abs(denom) < 1e-15:
            return 0
        w = a - o
        t = (w[0] * e[1] - w[1] * e[0]) / denom
        s = (w[0] * d[1] - w[1] * d[0]) / denom
        # half-open in s so shared loop vertices count once
        return 1 if t > 1e-12 and 0.0 <= s < 1.0 else 0

    def inside(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        votes = 0
        for d in _RAY_DIRS_2D:
            hits = self.bvh.ray_count(x, d, self._segment_hit)
            votes += hits % 2
        return votes >= 2

    def scale(self) -> float:
        return float(np.max(np.linalg.norm(np.vstack([self.a, self.b]), axis=1)))


class TriangleMesh:
    """Triangle soup forming a closed surface, behind a BVH."""

    dim = 3

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        v = np.asarray(vertices, dtype=float)
        f = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be (m, 3) vertex indices")
        if f.min(initial=0) < 0 or f.max(initial=-1) >= v.shape[0]:
            raise ValueError("face index out of range")
        self.vertices = v
        self.faces = f
        self.tri = v[f]
        for a in (self.vertices, self.faces, self.tri):
            a.setflags(write=False)
        self.bvh = BVH(self.tri.min(axis=1), self.tri.max(axis=1))

    def __len__(self):
        return self.faces.shape[0]

    def element_closest(self, i: int, x: np.ndarray) -> np.ndarray:
        t = self.tri[i]
        return _closest_on_triangle(x, t[0], t[1], t[2])

    def closest(self, x):
        return self.bvh.closest(np.asarray(x, dtype=float), self.element_closest)

    def closest_brute(self, x):
        x = np.asarray(x, dtype=float)
        best = (np.inf, -1, None)
        for i in range(len(self)):
            p = self.element_closest(i, x)
            d = float(np.linalg.norm(p - x))
            if d < best[0]:
                best = (d, i, p)
        return best

    def _triangle_hit(self, i: int, o: np.ndarray, d: np.ndarray) -> int:
        a, b, c = self.tri[i]
        e1 = b - a
        e2 = c - a
        pvec = np.cross(d, e2)
        det = float(np.dot(e1, pvec))
        if abs(det) < 1e-15:
            return 0
        inv = 1.0 / det
        tvec = o - a
        u = float(np.dot(tvec, pvec)) * inv
        if u < 0.0 or u > 1.0:
            return 0
        qvec = np.cross(tvec, e1)
        v = float(np.dot(d, qvec)) * inv
        if v < 0.0 or u + v > 1.0:
            return 0
        t = float(np.dot(e2, qvec)) * inv
        return 1 if t > 1e-12 else 0

    def inside(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        votes = 0
        for d in _RAY_DIRS_3D:
            hits = self.bvh.ray_count(x, d, self._triangle_hit)
            votes += hits % 2
        return votes >= 2

    def scale(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))


def load_polyline(path) -> PolylineSet:
    """Plain text: repeated blocks of `POLYLINE n` then n `x y` rows."""
    loops = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0].upper() != "POLYLINE" or len(head) != 2:
            raise ValueError(f"expected 'POLYLINE n' header, got {lines[i]!r}")
        n = int(head[1])
        if n < 3:
            raise ValueError("a polyline loop needs at least 3 points")
        if len(lines) - (i + 1) < n:
            raise ValueError("polyline block shorter than its declared count")
        pts = []
        for row in lines[i + 1:i + 1 + n]:
            xy = row.split()
            if len(xy) != 2:
                raise ValueError(f"expected 'x y' row, got {row!r}")
            pts.append((float(xy[0]), float(xy[1])))
        loops.append(np.array(pts))
        i += 1 + n
    if not loops:
        raise ValueError("no POLYLINE blocks found")
    return PolylineSet(loops)


def load_obj(path) -> TriangleMesh:
    """ASCII OBJ, triangles only; v and f records, 1-based indices."""
    verts = []
    faces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValueError(f"line {lineno}: vertex needs 3 coordinates")
                verts.append(tuple(float(c) for c in parts[1:4]))
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise ValueError(f"line {lineno}: only triangular faces are supported")
                idx = []
                for token in parts[1:]:
                    first = token.split("/")[0]
                    i = int(first)
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                faces.append(tuple(idx))
            # other record types (vn, vt, o, g, s, usemtl...) are ignored
    if not verts or not faces:
        raise ValueError("OBJ file has no triangles")
    return TriangleMesh(np.array(verts), np.array(faces))
