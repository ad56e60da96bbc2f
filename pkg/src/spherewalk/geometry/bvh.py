"""Median-split bounding volume hierarchy over boundary elements.

Stored as flat arrays so the compiled walk core can traverse the same
structure without touching Python objects. Leaves keep a contiguous
range of a permutation of element indices.
"""

from __future__ import annotations

import numpy as np

_LEAF_SIZE = 4


class BVH:
    def __init__(self, bbox_min: np.ndarray, bbox_max: np.ndarray):
        bbox_min = np.asarray(bbox_min, dtype=float)
        bbox_max = np.asarray(bbox_max, dtype=float)
        if bbox_min.shape != bbox_max.shape or bbox_min.ndim != 2:
            raise ValueError("element bounds must be (n, dim) arrays")
        n, dim = bbox_min.shape
        if n == 0:
            raise ValueError("cannot build a BVH over zero elements")
        self.dim = dim
        centroids = 0.5 * (bbox_min + bbox_max)
        self.order = np.arange(n)

        node_min, node_max, node_left, node_right, node_start, node_count = [], [], [], [], [], []

        def build(lo: int, hi: int) -> int:
            idx = len(node_min)
            sel = self.order[lo:hi]
            node_min.append(bbox_min[sel].min(axis=0))
            node_max.append(bbox_max[sel].max(axis=0))
            node_left.append(-1)
            node_right.append(-1)
            node_start.append(lo)
            node_count.append(hi - lo)
            if hi - lo > _LEAF_SIZE:
                spread = centroids[sel].max(axis=0) - centroids[sel].min(axis=0)
                axis = int(np.argmax(spread))
                mid = (lo + hi) // 2
                part = np.argsort(centroids[sel, axis], kind="stable")
                self.order[lo:hi] = sel[part]
                node_count[idx] = 0
                node_left[idx] = build(lo, mid)
                node_right[idx] = build(mid, hi)
            return idx

        build(0, n)
        self.node_min = np.asarray(node_min)
        self.node_max = np.asarray(node_max)
        self.node_left = np.asarray(node_left, dtype=np.int64)
        self.node_right = np.asarray(node_right, dtype=np.int64)
        self.node_start = np.asarray(node_start, dtype=np.int64)
        self.node_count = np.asarray(node_count, dtype=np.int64)
        for a in (self.order, self.node_min, self.node_max, self.node_left,
                  self.node_right, self.node_start, self.node_count):
            a.setflags(write=False)

    def _box_dist2(self, node: int, x: np.ndarray) -> float:
        d = np.maximum(np.maximum(self.node_min[node] - x, x - self.node_max[node]), 0.0)
        return float(np.dot(d, d))

    def closest(self, x: np.ndarray, element_closest) -> tuple[float, int, np.ndarray]:
        """Nearest element via pruned traversal.

        element_closest(i, x) returns the closest point on element i.
        Returns (distance, element index, closest point).
        """
        x = np.asarray(x, dtype=float)
        best_d2 = np.inf
        best_elem = -1
        best_point = None
        stack = [0]
        while stack:
            node = stack.pop()
            # non-strict so boxes tying at the best distance still get
            # visited and the index tie-break stays authoritative
            if self._box_dist2(node, x) > best_d2:
                continue
            if self.node_left[node] < 0:
                s = self.node_start[node]
                for i in self.order[s:s + self.node_count[node]]:
                    p = element_closest(int(i), x)
                    diff = p - x
                    d2 = float(np.dot(diff, diff))
                    # lowest element index wins exact ties (shared vertices)
                    if d2 < best_d2 or (d2 == best_d2 and int(i) < best_elem):
                        best_d2, best_elem, best_point = d2, int(i), p
            else:
                l, r = int(self.node_left[node]), int(self.node_right[node])
                dl, dr = self._box_dist2(l, x), self._box_dist2(r, x)
                # push the farther child first so the nearer is visited next
                if dl <= dr:
                    stack.append(r)
                    stack.append(l)
                else:
                    stack.append(l)
                    stack.append(r)
        return float(np.sqrt(best_d2)), best_elem, best_point

    def ray_count(self, origin: np.ndarray, direction: np.ndarray, element_hits) -> int:
        """Total ray-element crossings; element_hits(i, o, d) gives 0 or 1."""
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        safe = np.where(np.abs(direction) < 1e-300, 1e-300, direction)
        inv = 1.0 / safe
        hits = 0
        stack = [0]
        while stack:
            node = stack.pop()
            t0 = (self.node_min[node] - origin) * inv
            t1 = (self.node_max[node] - origin) * inv
            tmin = float(np.max(np.minimum(t0, t1)))
            tmax = float(np.min(np.maximum(t0, t1)))
            if tmax < max(tmin, 0.0):
                continue
            if self.node_left[node] < 0:
                s = self.node_start[node]
                for i in self.order[s:s + self.node_count[node]]:
                    hits += element_hits(int(i), origin, direction)
            else:
                stack.append(int(self.node_left[node]))
                stack.append(int(self.node_right[node]))
        return hits
