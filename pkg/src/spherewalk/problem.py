"""Problem definition and the change of variables to screened form.

The solver handles  div(alpha grad u) + omega . grad u - sigma u = -f
with Dirichlet data g.  Walks do not run on that equation directly:
with the total potential  gamma = ln(alpha)/2 + gamma_w  (gamma_w is
the optional drift potential, omega := 2 alpha grad gamma_w), the
substitution U = e^gamma u turns it into

    lap U - sigma'(x) U = -f'(x),

where sigma' = sigma/alpha + lap(gamma) + |grad gamma|^2,
f' = e^gamma f / alpha, and boundary data g' = e^gamma g.  Everything
downstream (kernels, walks) sees only this transformed problem.

Drift is accepted ONLY through the potential gamma_w.  A raw vector
field whose alpha-scaled form is not a gradient has no such potential
and the walk construction does not apply to it, so the API rejects the
shape outright instead of silently producing biased answers.  A
declared omega field may still be attached for documentation and is
cross-checked against 2 alpha grad gamma_w by validate_drift_potential.

sigma' is generally NOT bounded by sigma/alpha and can be negative
(e.g. near the peak of a bump-shaped alpha).  The delta-tracking and
next-flight estimators therefore need a constant screening value that
dominates sigma' everywhere; see sigma_bar_default and
shifted_sigma_for_kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from ._philox import PhiloxStream
from .fields import Constant, ProductField, ScalarField, _dot
from .geometry import Scene

__all__ = [
    "DriftConsistencyError",
    "ManufacturedSource",
    "Problem",
    "TransformedProblem",
    "conformal_adapter",
    "manufactured_problem",
    "shifted_sigma_for_kernels",
    "sigma_bar_default",
    "stratified_interior_points",
    "transform",
    "validate_drift_potential",
]

# Probe positions must not depend on the user's walk seed, or two runs of
# the same problem could disagree about sigma_bar.
_PROBE_SEED = 0x51A7ED
_DRIFT_TOL = 1e-8


class DriftConsistencyError(ValueError):
    """Declared drift disagrees with 2 alpha grad(gamma_w)."""


@dataclass(frozen=True)
class Problem:
    """Coefficient tuple of the divergence-form equation.

    alpha must be positive and sigma nonnegative on the domain; both are
    checked at the probe points whenever a probing operation runs.
    declared_omega, when given, is one ScalarField per component and is
    only ever used for the consistency check.  reference optionally
    carries the exact solution of a manufactured problem so validation
    studies can measure error without re-deriving it.
    """

    alpha: ScalarField
    sigma: ScalarField
    f: ScalarField
    g: ScalarField
    drift_potential: Optional[ScalarField] = None
    conformal_scale: Optional[ScalarField] = None
    declared_omega: Optional[tuple] = None
    reference: Optional[ScalarField] = None

    def __post_init__(self):
        if self.declared_omega is not None:
            object.__setattr__(self, "declared_omega", tuple(self.declared_omega))

    def omega(self, x: np.ndarray) -> np.ndarray:
        if self.drift_potential is None:
            return np.zeros_like(x, dtype=np.float64)
        return 2.0 * self.alpha.value(x) * self.drift_potential.gradient(x)


class _Gamma:
    """Total potential gamma = ln(alpha)/2 + gamma_w with derivatives.

    grad gamma = grad(alpha)/(2 alpha) + grad gamma_w
    lap gamma  = lap(alpha)/(2 alpha) - |grad alpha|^2/(2 alpha^2)
                 + lap gamma_w
    """

    def __init__(self, alpha: ScalarField, gamma_w: Optional[ScalarField]):
        self._alpha = alpha
        self._gw = gamma_w

    def value(self, x: np.ndarray) -> float:
        v = 0.5 * math.log(self._alpha.value(x))
        if self._gw is not None:
            v += self._gw.value(x)
        return v

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = self._alpha.gradient(x) / (2.0 * self._alpha.value(x))
        if self._gw is not None:
            g = g + self._gw.gradient(x)
        return g

    def laplacian(self, x: np.ndarray) -> float:
        a = self._alpha.value(x)
        ga = self._alpha.gradient(x)
        v = self._alpha.laplacian(x) / (2.0 * a) - _dot(ga, ga) / (2.0 * a * a)
        if self._gw is not None:
            v += self._gw.laplacian(x)
        return v


class TransformedProblem:
    """Screened-form view of a Problem.

    sigma_bar / sigma_prime_min / sigma_prime_max start unset and are
    filled exactly once by sigma_bar_default; after that the object is
    never mutated, so concurrent evaluation is safe.
    """

    __slots__ = ("problem", "_gamma", "sigma_bar", "sigma_prime_min", "sigma_prime_max")

    def __init__(self, problem: Problem):
        self.problem = problem
        self._gamma = _Gamma(problem.alpha, problem.drift_potential)
        self.sigma_bar: Optional[float] = None
        self.sigma_prime_min: Optional[float] = None
        self.sigma_prime_max: Optional[float] = None

    def gamma(self, x: np.ndarray) -> float:
        return self._gamma.value(x)

    def gamma_gradient(self, x: np.ndarray) -> np.ndarray:
        return self._gamma.gradient(x)

    def sigma_prime(self, x: np.ndarray) -> float:
        g = self._gamma.gradient(x)
        return (
            self.problem.sigma.value(x) / self.problem.alpha.value(x)
            + self._gamma.laplacian(x)
            + _dot(g, g)
        )

    def f_prime(self, x: np.ndarray) -> float:
        return math.exp(self._gamma.value(x)) * self.problem.f.value(x) / self.problem.alpha.value(x)

    def g_prime(self, x: np.ndarray) -> float:
        return math.exp(self._gamma.value(x)) * self.problem.g.value(x)


def transform(problem: Problem, scene: Optional[Scene] = None,
              probe_count: int = 4096) -> TransformedProblem:
    """Build the screened-form view; with a scene, also validate and
    compute the default sigma_bar in one go."""
    t = TransformedProblem(problem)
    if scene is not None:
        sigma_bar_default(t, scene, probe_count)
    return t


def stratified_interior_points(scene: Scene, count: int,
                               extra: Optional[Sequence] = None) -> np.ndarray:
    """Jittered-grid samples of the scene bounding box, kept if inside.

    One jittered point per cell of an n-per-axis grid over
    [-scale, scale]^dim with n^dim >= count.  The jitter stream is keyed
    by a fixed module seed and the requested count, never by user seeds,
    so the probe set is reproducible.  extra points are appended after
    an inside check.
    """
    if count < 1:
        raise ValueError("probe count must be at least 1")
    dim = scene.dim
    n = max(1, math.ceil(count ** (1.0 / dim) - 1e-9))
    rng = PhiloxStream(_PROBE_SEED, count)
    lo = -scene.scale
    cell = 2.0 * scene.scale / n
    pts = []
    idx = np.zeros(dim, dtype=np.int64)
    total = n**dim
    for flat in range(total):
        rem = flat
        for k in range(dim):
            idx[k] = rem % n
            rem //= n
        p = np.empty(dim, dtype=np.float64)
        for k in range(dim):
            p[k] = lo + (idx[k] + rng.u()) * cell
        if scene.inside(p):
            pts.append(p)
    if extra is not None:
        for q in extra:
            q = np.asarray(q, dtype=np.float64)
            if scene.inside(q):
                pts.append(q)
    if not pts:
        raise ValueError("no probe point landed inside the domain; check the scene")
    return np.asarray(pts)


def _validated_probe_values(t: TransformedProblem, probes: np.ndarray) -> np.ndarray:
    vals = np.empty(len(probes))
    for i, p in enumerate(probes):
        a = t.problem.alpha.value(p)
        if not a > 0.0:
            raise ValueError(f"alpha must be positive on the domain; got {a} at {p.tolist()}")
        s = t.problem.sigma.value(p)
        if s < 0.0:
            raise ValueError(f"sigma must be nonnegative; got {s} at {p.tolist()}")
        vals[i] = t.sigma_prime(p)
    return vals


def sigma_bar_default(t: TransformedProblem, scene: Scene,
                      probe_count: int = 4096,
                      extra: Optional[Sequence] = None) -> float:
    """Default screening bound: spread of sigma' over the probe set.

    Returns max - min of sigma' at the probes and stores both extremes
    on the transformed problem.  A constant sigma' makes the spread
    zero, in which case the bound falls back to max(sigma', tau) with
    tau = 1e-6 / scale^2 so it stays positive.  Also where alpha > 0 and
    sigma >= 0 get checked.
    """
    probes = stratified_interior_points(scene, probe_count, extra)
    vals = _validated_probe_values(t, probes)
    lo = float(vals.min())
    hi = float(vals.max())
    tau = 1e-6 / scene.scale**2
    bar = hi - lo
    if bar == 0.0:
        bar = max(hi, tau)
    t.sigma_prime_min = lo
    t.sigma_prime_max = hi
    t.sigma_bar = bar
    return bar


def shifted_sigma_for_kernels(t: TransformedProblem) -> float:
    """Constant screening used to instantiate ball kernels.

    The walk needs a constant sigma_c with sigma_c >= sigma'(x)
    everywhere probed and sigma_c >= 0, so the null-collision weight
    1 - sigma'(y)/sigma_c never flips the sign of the interior term.
    max(sigma_bar, sigma_prime_max, tau) satisfies both: when sigma'
    dips negative the spread sigma_bar already exceeds the max, and for
    nonnegative sigma' the max itself is the tight choice.  Weights can
    exceed 1 where sigma' < 0; they stay nonnegative, which is what
    unbiasedness and the variance controls rely on.
    """
    if t.sigma_bar is None:
        raise ValueError("run sigma_bar_default before requesting the kernel screening")
    tau_like = t.sigma_bar  # already floored at tau by sigma_bar_default
    return max(tau_like, t.sigma_prime_max, 0.0)


def validate_drift_potential(problem: Problem, scene: Scene,
                             probe_count: int = 256) -> dict:
    """Cross-check the drift convention omega = 2 alpha grad(gamma_w).

    Two comparisons at the probe points: the closed-form gradient of
    gamma_w against central finite differences (catches a wrong
    derivative in a field implementation), and, when declared_omega was
    supplied, the declared components against 2 alpha grad gamma_w.
    Raises DriftConsistencyError when either deviation exceeds 1e-8.
    """
    if problem.drift_potential is None:
        raise ValueError("problem has no drift potential")
    probes = stratified_interior_points(scene, probe_count)
    h = scene.fd_step
    gw = problem.drift_potential
    fd_dev = 0.0
    decl_dev = 0.0
    for p in probes:
        grad = gw.gradient(p)
        for k in range(scene.dim):
            e = np.zeros(scene.dim)
            e[k] = h
            fd = (gw.value(p + e) - gw.value(p - e)) / (2.0 * h)
            fd_dev = max(fd_dev, abs(fd - grad[k]))
        if problem.declared_omega is not None:
            om = 2.0 * problem.alpha.value(p) * grad
            for k in range(scene.dim):
                decl_dev = max(decl_dev, abs(problem.declared_omega[k].value(p) - om[k]))
    report = {
        "probe_count": len(probes),
        "fd_gradient_max_dev": fd_dev,
        "declared_omega_max_dev": decl_dev if problem.declared_omega is not None else None,
    }
    if fd_dev > _DRIFT_TOL * max(1.0, scene.scale):
        raise DriftConsistencyError(
            f"gamma_w gradient disagrees with finite differences by {fd_dev:.3e}")
    if problem.declared_omega is not None and decl_dev > _DRIFT_TOL:
        raise DriftConsistencyError(
            f"declared omega deviates from 2 alpha grad gamma_w by {decl_dev:.3e}")
    return report


def conformal_adapter(problem: Problem, periodic_wrap: bool = False) -> Problem:
    """Rewrite a conformally-scaled problem as a plain one.

    A problem carrying conformal_scale lam stands for the metric-scaled
    operator; it is equivalent to the flat-metric equation with
    diffusion lam*lam, which the product field provides with exact
    derivatives.  periodic_wrap marks parameter-rectangle scenes whose
    walks wrap around; the flag is accepted here for interface
    completeness and consumed by the scene layer, not by this rewrite.
    """
    if problem.conformal_scale is None:
        return problem
    lam = problem.conformal_scale
    del periodic_wrap
    return Problem(
        alpha=ProductField(lam, lam),
        sigma=problem.sigma,
        f=problem.f,
        g=problem.g,
        drift_potential=problem.drift_potential,
        conformal_scale=None,
        declared_omega=problem.declared_omega,
        reference=problem.reference,
    )


class ManufacturedSource(ScalarField):
    """Source that makes u_ref the exact solution.

    f = -(alpha lap u + grad alpha . grad u) - omega . grad u + sigma u
    evaluated from the constituents' closed forms.  Only value() is
    meaningful: sources are sampled by the walks, never differentiated,
    and the third derivatives of u_ref that f's own gradient would need
    are not part of the field contract.
    """

    def __init__(self, alpha: ScalarField, sigma: ScalarField, u_ref: ScalarField,
                 drift_potential: Optional[ScalarField] = None):
        self._alpha = alpha
        self._sigma = sigma
        self._u = u_ref
        self._gw = drift_potential

    def value(self, x: np.ndarray) -> float:
        gu = self._u.gradient(x)
        val = -(
            self._alpha.value(x) * self._u.laplacian(x)
            + _dot(self._alpha.gradient(x), gu)
        ) + self._sigma.value(x) * self._u.value(x)
        if self._gw is not None:
            om = 2.0 * self._alpha.value(x) * self._gw.gradient(x)
            val -= _dot(om, gu)
        return val

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError("manufactured sources are value-only")

    def laplacian(self, x: np.ndarray) -> float:
        raise NotImplementedError("manufactured sources are value-only")


def manufactured_problem(alpha: ScalarField, sigma: ScalarField, u_ref: ScalarField,
                         drift_potential: Optional[ScalarField] = None) -> Problem:
    """Problem whose exact solution is u_ref (g := u_ref on the boundary)."""
    return Problem(
        alpha=alpha,
        sigma=sigma,
        f=ManufacturedSource(alpha, sigma, u_ref, drift_potential),
        g=u_ref,
        drift_potential=drift_potential,
        reference=u_ref,
    )
