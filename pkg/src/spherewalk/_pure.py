"""Reference implementations of the walk estimators.

These loops are the normative definition of every estimator: draw
order, branch conditions, and the floating-point expression shapes are
all part of the contract, and the compiled backend mirrors them
operation for operation so that a walk given the same stream produces
the same estimate on either backend.

All heterogeneous-coefficient walks run in transformed units: the walk
accumulates contributions to U = e^gamma u using f', g', and sigma',
and the caller converts back with one e^{-gamma(x)} factor at the end.
The alpha-ratio weights written into the recursive estimators' papers
are exactly this bookkeeping with the exponentials folded step by step;
keeping U-units makes each loop one multiply shorter and keeps the
weight-window quantity explicit.

Termination reasons: "boundary" (reached the epsilon-shell or stepped
across the boundary), "max_steps" (walk cap; the estimate is completed
with the boundary value at the closest point, a documented truncation),
"roulette" (killed by the weight window or a zero throughput).  When a
walk splits, the recorded reason is the first branch's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels as K
from .geometry import OutsideDomainError, boundary_point, distance_to_boundary
from .problem import shifted_sigma_for_kernels

__all__ = [
    "WalkConfig",
    "WalkError",
    "WalkStats",
    "WindowDecision",
    "apply_weight_window",
    "delta_tracking_estimate",
    "gradient_estimate",
    "next_flight_estimate",
    "sde_walk_estimate",
    "wos_classic",
]

# Probe-grid maxima undershoot a smooth field's true maximum by
# O(spacing^2), so walks occasionally see sigma' a little above the
# screening value.  Overshoots within this relative headroom clamp the
# null weight to zero (a second-order effect); anything larger means
# the screening value is wrong for the problem and the sample is
# flagged rather than silently absorbed.
_SCREEN_HEADROOM = 0.05


class WalkError(RuntimeError):
    """A single walk hit an invalid state; the sample should be flagged."""


@dataclass(frozen=True)
class WalkConfig:
    epsilon: Optional[float] = None
    max_steps: int = 10_000
    sigma_bar_override: Optional[float] = None
    weight_window: Optional[tuple] = None
    max_splits: int = 64
    rng_seed: int = 0
    sde_step: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.weight_window is not None:
            w = tuple(float(v) for v in self.weight_window)
            if len(w) != 2 or not 0.0 < w[0] < 1.0 < w[1]:
                raise ValueError("weight window must satisfy 0 < w_min < 1 < w_max")
            object.__setattr__(self, "weight_window", w)
        if self.max_splits < 1:
            raise ValueError("max_splits must be at least 1")
        if self.sigma_bar_override is not None and not self.sigma_bar_override > 0.0:
            raise ValueError("sigma_bar_override must be positive")
        if self.sde_step is not None and not self.sde_step > 0.0:
            raise ValueError("sde_step must be positive")


@dataclass
class WalkStats:
    steps: int = 0
    distance_queries: int = 0
    kernel_evals: int = 0
    terminated_by: Optional[str] = None
    splits: int = 0
    split_overflows: int = 0


@dataclass(frozen=True)
class WindowDecision:
    action: str  # "continue" | "terminate" | "split"
    weight: float
    count: int = 1


def apply_weight_window(w: float, window, rng) -> WindowDecision:
    """Russian roulette below the window, expected-value splitting above.

    Both branches preserve E[weight out] = w: a sub-window walk survives
    with probability w/w_min at weight w_min; an over-window walk of
    ratio m = w/w_max becomes floor(m) walks with probability
    floor(m)+1-m (else one more), each carrying w/m.
    """
    if not w > 0.0:
        raise ValueError("weight must be positive")
    wmin, wmax = window
    if w < wmin:
        if rng.u() < w / wmin:
            return WindowDecision("continue", wmin)
        return WindowDecision("terminate", 0.0, 0)
    if w > wmax:
        m = w / wmax
        n = int(math.floor(m))
        count = n if rng.u() < (n + 1.0 - m) else n + 1
        return WindowDecision("split", w / m, count)
    return WindowDecision("continue", w)


def _epsilon(cfg: WalkConfig, scene) -> float:
    return cfg.epsilon if cfg.epsilon is not None else scene.epsilon


def _kernel_sigma(transformed, cfg: WalkConfig) -> float:
    if cfg.sigma_bar_override is not None:
        return cfg.sigma_bar_override
    return shifted_sigma_for_kernels(transformed)


def _null_weight(sigma_prime_val: float, sigma_c: float) -> float:
    w = 1.0 - sigma_prime_val / sigma_c
    if w < 0.0:
        if w < -_SCREEN_HEADROOM:
            raise WalkError(
                f"sigma_prime {sigma_prime_val} exceeds the kernel screening {sigma_c} "
                "by more than probe resolution explains; raise probe_count or the override")
        w = 0.0
    return w


def wos_classic(scene, problem, x, cfg: WalkConfig, rng):
    """Constant-coefficient walk on spheres with screening.

    Requires alpha and sigma constant and no drift; f and g may vary.
    Solves a lap(u) - s u = -f by walking the screened kernels with
    sigma_eff = s/a and source weight f/a.  A weight window culls
    low-throughput walks by roulette; since the survival factor is a
    probability the throughput only ever shrinks, so the split side of
    the window can never trigger here.
    """
    from .fields import Constant

    if not isinstance(problem.alpha, Constant) or not isinstance(problem.sigma, Constant):
        raise ValueError("wos_classic needs constant alpha and sigma")
    if problem.drift_potential is not None:
        raise ValueError("wos_classic does not support drift")
    a = problem.alpha.c
    if not a > 0.0:
        raise ValueError("alpha must be positive")
    sigma_eff = problem.sigma.c / a
    if sigma_eff < 0.0:
        raise ValueError("sigma must be nonnegative")

    stats = WalkStats()
    eps = _epsilon(cfg, scene)
    window = cfg.weight_window
    x = np.array(x, dtype=np.float64)
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    est = 0.0
    throughput = 1.0
    while True:
        if stats.steps >= cfg.max_steps:
            est += throughput * problem.g.value(boundary_point(scene, x))
            stats.terminated_by = "max_steps"
            break
        stats.steps += 1
        stats.distance_queries += 1
        try:
            q = distance_to_boundary(scene, x)
        except OutsideDomainError:
            est += throughput * problem.g.value(boundary_point(scene, x))
            stats.terminated_by = "boundary"
            break
        if q.d < eps:
            est += throughput * problem.g.value(q.xbar)
            stats.terminated_by = "boundary"
            break
        k = K.BallKernel(center=x, radius=q.d, sigma=sigma_eff, dim=scene.dim)
        norm = K.green_norm(k)
        stats.kernel_evals += 1
        y, _ = K.sample_green_centered(k, rng)
        stats.kernel_evals += 1
        est += throughput * norm * problem.f.value(y) / a
        # boundary mass P |dB| written as the complement 1 - sigma |G|,
        # exact at sigma = 0 so a pure Laplace walk telescopes to g
        throughput *= 1.0 - sigma_eff * norm
        if window is not None and throughput < window[0]:
            decision = apply_weight_window(throughput, window, rng)
            if decision.action == "terminate":
                stats.terminated_by = "roulette"
                break
            throughput = decision.weight
        x = x + K.sample_sphere_uniform(scene.dim, q.d, rng)
    return est, stats


def _finish_branch(stats: WalkStats, reason: str) -> None:
    if stats.terminated_by is None:
        stats.terminated_by = reason


def _dt_walk_u(scene, transformed, x0, cfg: WalkConfig, rng, stats: WalkStats,
               sigma_c: float) -> float:
    """Delta-tracking walk accumulating U-unit contributions from x0.

    Shared by the public estimator and the gradient sub-walks.  Handles
    the weight window including splits: split branches go on a LIFO
    stack and draw from the same stream in pop order.
    """
    t = transformed
    eps = _epsilon(cfg, scene)
    window = cfg.weight_window
    est = 0.0
    x = np.array(x0, dtype=np.float64)
    throughput = 1.0
    gamma0 = t.gamma(x) if window is not None else 0.0
    stack = []
    while True:
        if stats.steps >= cfg.max_steps:
            est += throughput * t.g_prime(boundary_point(scene, x))
            _finish_branch(stats, "max_steps")
            if stack:
                x, throughput = stack.pop()
                continue
            break
        stats.steps += 1
        stats.distance_queries += 1
        done = None
        try:
            q = distance_to_boundary(scene, x)
        except OutsideDomainError:
            est += throughput * t.g_prime(boundary_point(scene, x))
            done = "boundary"
        if done is None and q.d < eps:
            est += throughput * t.g_prime(q.xbar)
            done = "boundary"
        if done is None:
            k = K.BallKernel(center=x, radius=q.d, sigma=sigma_c, dim=scene.dim)
            norm = K.green_norm(k)
            stats.kernel_evals += 1
            y, _ = K.sample_green_centered(k, rng)
            stats.kernel_evals += 1
            est += throughput * norm * t.f_prime(y)
            mu = rng.u()
            if mu <= sigma_c * norm:
                throughput *= _null_weight(t.sigma_prime(y), sigma_c)
                x = y
            else:
                x = x + K.sample_sphere_uniform(scene.dim, q.d, rng)
            if window is not None and throughput > 0.0:
                # the windowed quantity is the walk's cumulative weight
                # including the alpha-ratio (e^{gamma} ratio) factors
                track = throughput * math.exp(t.gamma(x) - gamma0)
                decision = apply_weight_window(track, window, rng)
                if decision.action == "terminate":
                    done = "roulette"
                elif decision.action == "continue":
                    throughput *= decision.weight / track
                else:
                    copies = decision.count - 1
                    if len(stack) + 1 + copies > cfg.max_splits:
                        stats.split_overflows += 1
                    else:
                        scaled = throughput * (decision.weight / track)
                        for _ in range(copies):
                            stack.append((x.copy(), scaled))
                        stats.splits += copies
                        throughput = scaled
            if done is None and throughput == 0.0:
                done = "roulette"
        if done is not None:
            _finish_branch(stats, done)
            if stack:
                x, throughput = stack.pop()
                continue
            break
    return est


def delta_tracking_estimate(scene, transformed, x, cfg: WalkConfig, rng):
    """Single-sample delta-tracking estimate of u(x).

    Per ball: one source sample y ~ G/|G| contributes |G| f'(y); a
    branch draw then either continues at y with the null weight
    1 - sigma'(y)/sigma_c (interior, probability sigma_c |G|) or jumps
    to a uniform boundary point.  The U-unit total converts back by
    e^{-gamma(x)}.
    """
    x = np.array(x, dtype=np.float64)
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    stats = WalkStats()
    sigma_c = _kernel_sigma(transformed, cfg)
    est_u = _dt_walk_u(scene, transformed, x, cfg, rng, stats, sigma_c)
    return est_u * math.exp(-transformed.gamma(x)), stats


def next_flight_estimate(scene, transformed, x, cfg: WalkConfig, rng):
    """Single-sample next-flight estimate of u(x).

    One exit point z per ball is shared by the whole interior chain;
    chain points are uniform in the ball, chained with off-centered
    kernels, and rouletted on their running throughput.  The chain draws
    from lane 1 of the walk's stream so the outer ball path consumes the
    identical draw sequence whatever the screening value, which is what
    makes the distance-query count independent of sigma_bar.
    """
    t = transformed
    x = np.array(x, dtype=np.float64)
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    stats = WalkStats()
    sigma_c = _kernel_sigma(t, cfg)
    eps = _epsilon(cfg, scene)
    window = cfg.weight_window
    chain_rng = rng.lane_stream(1)
    dim = scene.dim
    radius_exponent = 0.5 if dim == 2 else 1.0 / 3.0

    est = 0.0
    outer = 1.0
    xc = x
    stack = []
    while True:
        if stats.steps >= cfg.max_steps:
            est += outer * t.g_prime(boundary_point(scene, xc))
            _finish_branch(stats, "max_steps")
            if stack:
                xc, outer = stack.pop()
                continue
            break
        stats.steps += 1
        stats.distance_queries += 1
        done = None
        try:
            q = distance_to_boundary(scene, xc)
        except OutsideDomainError:
            est += outer * t.g_prime(boundary_point(scene, xc))
            done = "boundary"
        if done is None and q.d < eps:
            est += outer * t.g_prime(q.xbar)
            done = "boundary"
        if done is None:
            radius = q.d
            k = K.BallKernel(center=xc, radius=radius, sigma=sigma_c, dim=dim)
            area = K.sphere_area(k)
            volume = K.ball_volume(k)
            z = xc + K.sample_sphere_uniform(dim, radius, rng)
            boundary_mass = 0.0
            source_sum = 0.0
            xn = xc
            w = 1.0
            first = True
            while True:
                if first:
                    p_n = K.poisson_centered(k)
                else:
                    p_n = K.poisson_offcentered_approx(k, xn, z)
                stats.kernel_evals += 1
                boundary_mass += w * p_n * area
                r = radius * chain_rng.u() ** radius_exponent
                d = K._unit_dir(dim, chain_rng)
                xnext = xc + r * np.asarray(d)
                if first:
                    g_n = K.green_centered(k, r)
                else:
                    g_n = K.green_offcentered_approx(k, xn, xnext)
                stats.kernel_evals += 1
                base = w * g_n * volume
                source_sum += base * t.f_prime(xnext)
                w_null = sigma_c - t.sigma_prime(xnext)
                if w_null < 0.0:
                    if w_null < -_SCREEN_HEADROOM * sigma_c:
                        raise WalkError(
                            f"sigma_prime exceeds the kernel screening {sigma_c} along "
                            "a chain by more than probe resolution explains")
                    w_null = 0.0
                w = base * w_null
                p_rr = w if w < 1.0 else 1.0
                mu = chain_rng.u()
                if p_rr <= mu:
                    break
                if p_rr < 1.0:
                    w = 1.0
                first = False
                xn = xnext
            est += outer * source_sum
            outer *= boundary_mass
            xc = z
            if window is not None and outer > 0.0:
                decision = apply_weight_window(outer, window, rng)
                if decision.action == "terminate":
                    done = "roulette"
                elif decision.action == "continue":
                    outer = decision.weight
                else:
                    copies = decision.count - 1
                    if len(stack) + 1 + copies > cfg.max_splits:
                        stats.split_overflows += 1
                    else:
                        for _ in range(copies):
                            stack.append((xc.copy(), decision.weight))
                        stats.splits += copies
                        outer = decision.weight
            if done is None and outer == 0.0:
                done = "roulette"
        if done is not None:
            _finish_branch(stats, done)
            if stack:
                xc, outer = stack.pop()
                continue
            break
    return est * math.exp(-t.gamma(x)), stats


def gradient_estimate(scene, transformed, x, cfg: WalkConfig, rng):
    """Solution gradient from the first ball's gradient kernels.

    grad U(x) = int_B grad_x G . (f' + (sigma_c - sigma') U)
              + int_dB grad_x P . U
    sampled with one interior point y ~ G/|G| and one uniform boundary
    point z; the three unknown U values come from delta-tracking
    sub-walks run back to back on the walk's own stream.  Converting to
    u subtracts u(x) grad gamma(x), with gamma's analytic gradient.
    Returns (gradient vector, scalar u estimate, stats).
    """
    t = transformed
    x = np.array(x, dtype=np.float64)
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    stats = WalkStats()
    sigma_c = _kernel_sigma(t, cfg)
    eps = _epsilon(cfg, scene)
    stats.distance_queries += 1
    q = distance_to_boundary(scene, x)
    if q.d <= eps:
        raise WalkError(
            f"gradient needs distance-to-boundary above epsilon (d = {q.d}, eps = {eps})")
    dim = scene.dim
    k = K.BallKernel(center=x, radius=q.d, sigma=sigma_c, dim=dim)
    y, pdf_y = K.sample_green_centered(k, rng)
    stats.kernel_evals += 1
    z = x + K.sample_sphere_uniform(dim, q.d, rng)
    grad_g = K.green_gradient_centered(k, y)
    stats.kernel_evals += 1
    grad_p = K.poisson_gradient_centered(k, z)
    stats.kernel_evals += 1

    u_at_y = _dt_walk_u(scene, t, y, cfg, rng, stats, sigma_c)
    u_at_z = _dt_walk_u(scene, t, z, cfg, rng, stats, sigma_c)
    u_at_x = _dt_walk_u(scene, t, x, cfg, rng, stats, sigma_c)

    interior = t.f_prime(y) + (sigma_c - t.sigma_prime(y)) * u_at_y
    grad_big_u = grad_g * (interior / pdf_y) + grad_p * (u_at_z * K.sphere_area(k))
    scale = math.exp(-t.gamma(x))
    u_val = u_at_x * scale
    grad_u = grad_big_u * scale - u_val * t.gamma_gradient(x)
    return grad_u, u_val, stats


def sde_walk_estimate(scene, problem, x, h: float, cfg: WalkConfig, rng):
    """Euler-Maruyama baseline on the untransformed equation.

    Drift (omega + grad alpha)/2 and per-axis noise std sqrt(alpha h)
    give the generator (div(alpha grad) + omega . grad)/2, so the
    source and screening enter halved.  The walk accumulates discrete
    transmittance, clamps to the closest boundary point on exit, and
    reads g there; the clamp and the finite step are the (documented)
    bias, which shrinks as h does.
    """
    if not h > 0.0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    if not scene.inside(x):
        raise OutsideDomainError(f"start point {x} is not inside the domain")
    stats = WalkStats()
    dim = scene.dim
    transmittance = 1.0
    source = 0.0
    while True:
        if stats.steps >= cfg.max_steps:
            est = source + transmittance * problem.g.value(boundary_point(scene, x))
            stats.terminated_by = "max_steps"
            return est, stats
        stats.steps += 1
        a_val = problem.alpha.value(x)
        source += transmittance * 0.5 * problem.f.value(x) * h
        transmittance *= math.exp(-0.5 * problem.sigma.value(x) * h)
        drift = 0.5 * (problem.omega(x) + problem.alpha.gradient(x)) * h
        std = math.sqrt(a_val * h)
        n1, n2 = rng.normal_pair()
        if dim == 2:
            noise = np.array([std * n1, std * n2])
        else:
            n3, _ = rng.normal_pair()
            noise = np.array([std * n1, std * n2, std * n3])
        xn = x + drift + noise
        stats.distance_queries += 1
        if not scene.inside(xn):
            est = source + transmittance * problem.g.value(boundary_point(scene, xn))
            stats.terminated_by = "boundary"
            return est, stats
        x = xn
