"""Estimator dispatch, sample aggregation, and the batch solver.

`solve` evaluates u at a list of points with any of the four walk
estimators.  Every (point, sample) pair owns a counter-based stream
keyed by its indices alone, so results are bitwise independent of how
the work is split across processes, and rerunning a single sample in
isolation reproduces the batch value.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backend as _backend
from ._philox import PhiloxStream, walk_stream_id
from ._pure import (
    WalkConfig,
    WalkError,
    WalkStats,
    WindowDecision,
    apply_weight_window,
    delta_tracking_estimate,
    gradient_estimate,
    next_flight_estimate,
    sde_walk_estimate,
    wos_classic,
)
from .fields import Constant
from .geometry import OutsideDomainError
from .problem import conformal_adapter, transform

__all__ = [
    "ESTIMATOR_NAMES",
    "EstimateAccumulator",
    "GradientEstimate",
    "PointEstimate",
    "WalkConfig",
    "WalkError",
    "WalkStats",
    "WindowDecision",
    "apply_weight_window",
    "default_sde_step",
    "delta_tracking_estimate",
    "gradient_estimate",
    "next_flight_estimate",
    "sde_walk_estimate",
    "solve",
    "solve_gradient",
    "wos_classic",
]

ESTIMATOR_NAMES = ("classic", "dt", "nf", "sde")


class EstimateAccumulator:
    """Streaming mean and standard error (Welford update, Chan merge)."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "EstimateAccumulator") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n

    @property
    def variance_of_mean(self) -> float:
        if self.n < 2:
            return math.nan
        return self.m2 / (self.n * (self.n - 1))

    @property
    def stderr(self) -> float:
        v = self.variance_of_mean
        return math.sqrt(v) if v == v else math.nan


@dataclass(frozen=True)
class PointEstimate:
    point: tuple
    mean: float
    stderr: float
    n: int
    flagged: int
    steps: int
    distance_queries: int
    kernel_evals: int
    splits: int
    split_overflows: int
    terminations: dict


@dataclass(frozen=True)
class GradientEstimate:
    point: tuple
    gradient: tuple
    gradient_stderr: tuple
    u_mean: float
    u_stderr: float
    n: int
    flagged: int


def default_sde_step(scene) -> float:
    """Step size giving a few hundred steps across a unit-alpha domain."""
    return 1e-3 * scene.scale * scene.scale


def _accumulate_stats(totals: WalkStats, terminations: dict, st: WalkStats) -> None:
    totals.steps += st.steps
    totals.distance_queries += st.distance_queries
    totals.kernel_evals += st.kernel_evals
    totals.splits += st.splits
    totals.split_overflows += st.split_overflows
    if st.terminated_by is not None:
        terminations[st.terminated_by] = terminations.get(st.terminated_by, 0) + 1


def _native_point(scene, pack, x, point_index: int, spp: int) -> PointEstimate:
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    res = _backend.run_point(pack, x, point_index, spp)
    _, n, mean, m2, flagged, steps, queries, kevals, splits, overflows, nb, nm, nr, _ = res
    acc = EstimateAccumulator()
    acc.n, acc.mean, acc.m2 = int(n), float(mean), float(m2)
    terminations = {}
    if nb:
        terminations["boundary"] = int(nb)
    if nm:
        terminations["max_steps"] = int(nm)
    if nr:
        terminations["roulette"] = int(nr)
    return PointEstimate(
        point=tuple(float(v) for v in x),
        mean=acc.mean if acc.n else math.nan,
        stderr=acc.stderr,
        n=acc.n,
        flagged=int(flagged),
        steps=int(steps),
        distance_queries=int(queries),
        kernel_evals=int(kevals),
        splits=int(splits),
        split_overflows=int(overflows),
        terminations=terminations,
    )


def _solve_point(task) -> PointEstimate:
    scene, payload, estimator, point_index, point, spp, cfg, h, pack = task
    x = np.asarray(point, dtype=np.float64)
    if pack is not None:
        return _native_point(scene, pack, x, point_index, spp)
    acc = EstimateAccumulator()
    totals = WalkStats()
    terminations: dict = {}
    flagged = 0
    for sample in range(spp):
        rng = PhiloxStream(cfg.rng_seed, walk_stream_id(point_index, sample))
        try:
            if estimator == "dt":
                est, st = delta_tracking_estimate(scene, payload, x, cfg, rng)
            elif estimator == "nf":
                est, st = next_flight_estimate(scene, payload, x, cfg, rng)
            elif estimator == "classic":
                est, st = wos_classic(scene, payload, x, cfg, rng)
            else:
                est, st = sde_walk_estimate(scene, payload, x, h, cfg, rng)
        except WalkError:
            flagged += 1
            continue
        acc.add(est)
        _accumulate_stats(totals, terminations, st)
    return PointEstimate(
        point=tuple(float(v) for v in x),
        mean=acc.mean if acc.n else math.nan,
        stderr=acc.stderr,
        n=acc.n,
        flagged=flagged,
        steps=totals.steps,
        distance_queries=totals.distance_queries,
        kernel_evals=totals.kernel_evals,
        splits=totals.splits,
        split_overflows=totals.split_overflows,
        terminations=terminations,
    )


def _prepare(scene, problem, estimator: str, cfg: WalkConfig):
    if estimator not in ESTIMATOR_NAMES:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATOR_NAMES}")
    if estimator in ("dt", "nf"):
        return transform(conformal_adapter(problem), scene)
    if estimator == "classic":
        if not isinstance(problem.alpha, Constant) or not isinstance(problem.sigma, Constant):
            raise ValueError("the classic estimator needs constant alpha and sigma")
        if problem.drift_potential is not None:
            raise ValueError("the classic estimator does not support drift")
    return problem


def solve(scene, problem, points: Sequence, spp: int, estimator: str = "dt",
          cfg: Optional[WalkConfig] = None, workers: int = 1):
    """Estimate u at each point with spp walks; returns PointEstimates in order."""
    if spp < 1:
        raise ValueError("spp must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if cfg is None:
        cfg = WalkConfig()
    payload = _prepare(scene, problem, estimator, cfg)
    h = 0.0
    if estimator == "sde":
        h = cfg.sde_step if cfg.sde_step is not None else default_sde_step(scene)
    pack = _backend.build_pack(scene, payload, estimator, cfg, h)
    tasks = [(scene, payload, estimator, i, p, spp, cfg, h, pack)
             for i, p in enumerate(points)]
    if workers == 1:
        return [_solve_point(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_point, tasks, chunksize=chunk))


def _native_gradient(scene, pack, x, point_index: int, spp: int) -> GradientEstimate:
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    res = _backend.run_gradient_point(pack, x, point_index, spp)
    _, n, means, m2s, u_mean, u_m2, flagged, _ = res
    comp = []
    for mean, m2 in zip(means, m2s):
        a = EstimateAccumulator()
        a.n, a.mean, a.m2 = int(n), float(mean), float(m2)
        comp.append(a)
    u_acc = EstimateAccumulator()
    u_acc.n, u_acc.mean, u_acc.m2 = int(n), float(u_mean), float(u_m2)
    return GradientEstimate(
        point=tuple(float(v) for v in x),
        gradient=tuple(a.mean if a.n else math.nan for a in comp),
        gradient_stderr=tuple(a.stderr for a in comp),
        u_mean=u_acc.mean if u_acc.n else math.nan,
        u_stderr=u_acc.stderr,
        n=u_acc.n,
        flagged=int(flagged),
    )


def _solve_gradient_point(task) -> GradientEstimate:
    scene, transformed, point_index, point, spp, cfg, pack = task
    x = np.asarray(point, dtype=np.float64)
    if pack is not None:
        return _native_gradient(scene, pack, x, point_index, spp)
    dim = x.shape[0]
    comp = [EstimateAccumulator() for _ in range(dim)]
    u_acc = EstimateAccumulator()
    flagged = 0
    for sample in range(spp):
        rng = PhiloxStream(cfg.rng_seed, walk_stream_id(point_index, sample))
        try:
            grad, u_val, _ = gradient_estimate(scene, transformed, x, cfg, rng)
        except WalkError:
            flagged += 1
            continue
        for a, v in zip(comp, grad):
            a.add(float(v))
        u_acc.add(u_val)
    return GradientEstimate(
        point=tuple(float(v) for v in x),
        gradient=tuple(a.mean if a.n else math.nan for a in comp),
        gradient_stderr=tuple(a.stderr for a in comp),
        u_mean=u_acc.mean if u_acc.n else math.nan,
        u_stderr=u_acc.stderr,
        n=u_acc.n,
        flagged=flagged,
    )


def solve_gradient(scene, problem, points: Sequence, spp: int,
                   cfg: Optional[WalkConfig] = None, workers: int = 1):
    """Estimate grad u (and u) at each point via the gradient kernels."""
    if spp < 1:
        raise ValueError("spp must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if cfg is None:
        cfg = WalkConfig()
    transformed = transform(conformal_adapter(problem), scene)
    pack = _backend.build_pack(scene, transformed, "dt", cfg)
    tasks = [(scene, transformed, i, p, spp, cfg, pack) for i, p in enumerate(points)]
    if workers == 1:
        return [_solve_gradient_point(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_gradient_point, tasks, chunksize=chunk))
