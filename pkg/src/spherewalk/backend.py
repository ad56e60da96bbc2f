"""Backend selection: pack problems for the compiled core, or decline.

The compiled extension reimplements the walks operation for operation,
so a packed problem produces bit-identical estimates on either backend.
Packing succeeds only for geometry and fields the core knows: the
concrete SDF node and field classes from this package, by exact type.
Anything else (discrete boundaries, user subclasses) returns None and
the caller runs the pure-Python reference instead, which is always
correct, just slower.

Set SPHEREWALK_PURE=1 to force the reference backend for a whole
process; the `force_pure` module flag does the same per call and exists
for tests and benchmarks.
"""

from __future__ import annotations

import math
import os
from typing import Optional

import numpy as np

from . import kernels
from .fields import (Constant, Exponential, GaussianBump, Linear,
                     ProductField, Sinusoid, SumField)
from .geometry.sdf import (BoxSDF, DifferenceSDF, IntersectionSDF, PlaneSDF,
                           SDFNode, SmoothUnionSDF, SphereSDF, TransformedSDF,
                           UnionSDF)
from .problem import ManufacturedSource, shifted_sigma_for_kernels

__all__ = ["active_backend", "build_pack", "force_pure", "run_gradient_point",
           "run_point"]

_FORCE_PURE = os.environ.get("SPHEREWALK_PURE", "") == "1"

try:
    from ._native import core as _core
except ImportError:    # pragma: no cover - build always ships the extension
    _core = None

# per-call escape hatch for tests and benchmarks
force_pure = False

_MASK64 = (1 << 64) - 1
_EST_CODES = {"classic": 0, "dt": 1, "nf": 2, "sde": 3}


def active_backend() -> str:
    """Name of the backend new solves will try first."""
    if _core is None or _FORCE_PURE:
        return "pure"
    return "compiled"


class _Unpackable(Exception):
    pass


class _TreePack:
    """Flat parallel-array encoding of a node tree."""

    def __init__(self):
        self.ntype: list = []
        self.pofs: list = []
        self.params: list = []
        self.cofs: list = []
        self.ccnt: list = []
        self.child: list = []

    def add(self, code: int, params, children) -> int:
        node = len(self.ntype)
        self.ntype.append(code)
        self.pofs.append(len(self.params))
        self.params.extend(params)
        self.cofs.append(len(self.child))
        self.ccnt.append(len(children))
        self.child.extend(children)
        return node

    def arrays(self):
        return (
            np.asarray(self.ntype, dtype=np.intc),
            np.asarray(self.pofs, dtype=np.intc),
            np.asarray(self.params, dtype=np.float64),
            np.asarray(self.cofs, dtype=np.intc),
            np.asarray(self.ccnt, dtype=np.intc),
            np.asarray(self.child, dtype=np.intc),
        )


def _vec(v, dim: int) -> list:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (dim,):
        raise _Unpackable
    return [float(x) for x in arr]


def _pack_sdf(tp: _TreePack, node, dim: int) -> int:
    t = type(node)
    if t is SphereSDF:
        return tp.add(0, [*_vec(node.center, dim), float(node.radius)], [])
    if t is BoxSDF:
        return tp.add(1, [*_vec(node.center, dim), *_vec(node.half_extents, dim)], [])
    if t is PlaneSDF:
        return tp.add(2, [*_vec(node.point, dim), *_vec(node.normal, dim)], [])
    if t is UnionSDF or t is IntersectionSDF:
        kids = [_pack_sdf(tp, ch, dim) for ch in node.children]
        if not kids:
            raise _Unpackable
        return tp.add(3 if t is UnionSDF else 4, [], kids)
    if t is DifferenceSDF:
        kids = [_pack_sdf(tp, node.base, dim), _pack_sdf(tp, node.cut, dim)]
        return tp.add(5, [], kids)
    if t is SmoothUnionSDF:
        kids = [_pack_sdf(tp, node.a, dim), _pack_sdf(tp, node.b, dim)]
        return tp.add(6, [float(node.k)], kids)
    if t is TransformedSDF:
        rot = np.asarray(node.rotation, dtype=float)
        if rot.shape != (dim, dim):
            raise _Unpackable
        kid = _pack_sdf(tp, node.child, dim)
        params = [float(v) for v in rot.reshape(-1)] + _vec(node.translation, dim)
        return tp.add(7, params, [kid])
    raise _Unpackable


def _pack_field(tp: _TreePack, memo: dict, f, dim: int) -> int:
    key = id(f)
    if key in memo:
        return memo[key]
    t = type(f)
    if t is Constant:
        node = tp.add(0, [float(f.c)], [])
    elif t is Linear:
        node = tp.add(1, [float(f.a), *_vec(f.b, dim)], [])
    elif t is Exponential:
        node = tp.add(2, _vec(f.c, dim), [])
    elif t is GaussianBump:
        node = tp.add(3, [*_vec(f.center, dim), float(f.amplitude),
                          float(f.width) ** 2, float(f.baseline)], [])
    elif t is Sinusoid:
        node = tp.add(4, [float(f.amplitude), float(f.phase), float(f.offset),
                          *_vec(f.frequency, dim)], [])
    elif t is SumField:
        kids = [_pack_field(tp, memo, ch, dim) for ch in f.terms]
        if not kids:
            raise _Unpackable
        node = tp.add(5, [], kids)
    elif t is ProductField:
        kids = [_pack_field(tp, memo, f.left, dim),
                _pack_field(tp, memo, f.right, dim)]
        node = tp.add(6, [], kids)
    elif t is ManufacturedSource:
        kids = [_pack_field(tp, memo, f._alpha, dim),
                _pack_field(tp, memo, f._sigma, dim),
                _pack_field(tp, memo, f._u, dim)]
        if f._gw is not None:
            kids.append(_pack_field(tp, memo, f._gw, dim))
        node = tp.add(7, [], kids)
    else:
        raise _Unpackable
    memo[key] = node
    return node


def build_pack(scene, payload, estimator: str, cfg, h: float = 0.0):
    """Encode one solve for the compiled core; None means run pure.

    `payload` is what the estimator layer prepared: the transformed
    problem for dt/nf (and gradients, which pass "dt"), the raw problem
    for classic and sde.
    """
    if _core is None or _FORCE_PURE or force_pure:
        return None
    if not isinstance(scene.boundary, SDFNode):
        return None
    a_const = 0.0
    sigma_c = 0.0
    try:
        sp = _TreePack()
        sroot = _pack_sdf(sp, scene.boundary, scene.dim)
        fp = _TreePack()
        memo: dict = {}
        if estimator in ("dt", "nf"):
            prob = payload.problem
            ia = _pack_field(fp, memo, prob.alpha, scene.dim)
            isig = _pack_field(fp, memo, prob.sigma, scene.dim)
            iff = _pack_field(fp, memo, prob.f, scene.dim)
            ig = _pack_field(fp, memo, prob.g, scene.dim)
            igw = -1
            if prob.drift_potential is not None:
                igw = _pack_field(fp, memo, prob.drift_potential, scene.dim)
            if cfg.sigma_bar_override is not None:
                sigma_c = cfg.sigma_bar_override
            else:
                sigma_c = shifted_sigma_for_kernels(payload)
        elif estimator == "classic":
            a_const = float(payload.alpha.c)
            sigma_c = float(payload.sigma.c) / a_const if a_const > 0.0 else -1.0
            if a_const <= 0.0 or sigma_c < 0.0:
                return None    # let the reference walk raise its error
            ia = isig = igw = -1
            iff = _pack_field(fp, memo, payload.f, scene.dim)
            ig = _pack_field(fp, memo, payload.g, scene.dim)
        elif estimator == "sde":
            ia = _pack_field(fp, memo, payload.alpha, scene.dim)
            isig = _pack_field(fp, memo, payload.sigma, scene.dim)
            iff = _pack_field(fp, memo, payload.f, scene.dim)
            ig = _pack_field(fp, memo, payload.g, scene.dim)
            igw = -1
            if payload.drift_potential is not None:
                igw = _pack_field(fp, memo, payload.drift_potential, scene.dim)
        else:
            return None
    except _Unpackable:
        return None
    eps = cfg.epsilon if cfg.epsilon is not None else scene.epsilon
    window = cfg.weight_window
    imeta = np.asarray(
        [_EST_CODES[estimator], scene.dim, cfg.max_steps, cfg.max_splits,
         1 if window is not None else 0, ia, isig, iff, ig, igw, sroot],
        dtype=np.int64,
    )
    dmeta = np.asarray(
        [eps, sigma_c,
         window[0] if window is not None else 0.0,
         window[1] if window is not None else 0.0,
         h, a_const, scene.fd_step],
        dtype=np.float64,
    )
    seed = cfg.rng_seed & _MASK64
    return (imeta, dmeta, seed, *sp.arrays(), *fp.arrays())


def _check(res):
    if res[0] == "envelope":
        raise kernels.EnvelopeError(
            f"10000 consecutive rejections at R = {res[1]}, sigma = {res[2]}"
        )
    if res[0] != "ok":
        raise RuntimeError(
            "compiled walk rejected a kernel argument; "
            "set SPHEREWALK_PURE=1 to reproduce with full diagnostics"
        )
    return res


def run_point(pack, x, point_index: int, spp: int):
    """Compiled batch at one point; mirrors the per-sample reference loop."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    res = _check(_core.solve_point(pack, arr, point_index, spp))
    kernels.envelope_violations += int(res[13])
    return res


def run_gradient_point(pack, x, point_index: int, spp: int):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    res = _check(_core.solve_gradient_point(pack, arr, point_index, spp))
    kernels.envelope_violations += int(res[7])
    return res
