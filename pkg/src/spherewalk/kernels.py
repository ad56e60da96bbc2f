"""Green's functions, Poisson kernels, norms, gradients, and samplers on a
screened ball.

Everything refers to the operator  lap - sigma  on a ball B(c, R) with
constant screening sigma >= 0 and homogeneous Dirichlet conditions on the
sphere. sigma = 0 is dispatched to the harmonic closed forms explicitly
(the screened expressions degenerate to 0/0 there), and every screened
expression is written in exponentially scaled form so large R*sqrt(sigma)
neither overflows nor produces 0*inf.

The scalar helpers are the normative expression set: the compiled walk
core transliterates them operation for operation, which is what makes the
two backends agree bitwise on identical random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import i0e, i1e, ive, k0e, k1e, kve

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi

# below this value of q = R sqrt(sigma) the screened forms are numerically
# indistinguishable from (and far less accurate than) the harmonic ones
_HARMONIC_Q = 1e-8

#: running count of envelope violations seen by the rejection sampler in
#: this process (audited to stay 0 on the supported parameter grid)
envelope_violations = 0


def _dotv(a, b) -> float:
    # pinned left-to-right accumulation; see the module docstring on why
    # no BLAS-backed reduction is allowed in kernel arithmetic
    s = 0.0
    for i in range(len(a)):
        s += float(a[i]) * float(b[i])
    return s


def _vnorm(v) -> float:
    return math.sqrt(_dotv(v, v))


class EnvelopeError(RuntimeError):
    """Rejection sampling failed: the radial bound h(R, sigma) is invalid."""


@dataclass(frozen=True)
class BallKernel:
    """Evaluation context for all kernel quantities on one ball."""

    center: np.ndarray
    radius: float
    sigma: float
    dim: int
    sqrt_sigma: float = field(init=False)

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if center.shape != (self.dim,):
            raise ValueError(f"center shape {center.shape} does not match dim {self.dim}")
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        object.__setattr__(self, "sqrt_sigma", math.sqrt(self.sigma))


def sphere_area(k: BallKernel) -> float:
    R = k.radius
    return TWO_PI * R if k.dim == 2 else FOUR_PI * R * R


def ball_volume(k: BallKernel) -> float:
    R = k.radius
    return math.pi * R * R if k.dim == 2 else FOUR_PI * R * R * R / 3.0


# -- scalar cores (normative forms, mirrored by the compiled backend) -----

def _q_2d(r: float, R: float, s: float) -> float:
    # K0(rs) - (K0(q)/I0(q)) I0(rs), exponentially scaled
    rs = r * s
    q = R * s
    return k0e(rs) * math.exp(-rs) - (k0e(q) / i0e(q)) * (i0e(rs) * math.exp(rs - 2.0 * q))


def _q_3d_r(r: float, R: float, s: float) -> float:
    # r * Q3(r) = exp(-rho) - exp(-q) sinh(rho)/sinh(q), scaled
    rho = r * s
    q = R * s
    num = math.exp(rho - 2.0 * q) * (-math.expm1(-2.0 * rho))
    den = -math.expm1(-2.0 * q)
    return math.exp(-rho) - num / den


def _green_centered_raw(dim: int, r: float, R: float, sigma: float, s: float) -> float:
    if r >= R:
        return 0.0
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        if dim == 2:
            return math.log(R / r) / TWO_PI
        return (1.0 / r - 1.0 / R) / FOUR_PI
    if dim == 2:
        return _q_2d(r, R, s) / TWO_PI
    return _q_3d_r(r, R, s) / (FOUR_PI * r)


def _green_norm_raw(dim: int, R: float, sigma: float, s: float) -> float:
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        return R * R / 4.0 if dim == 2 else R * R / 6.0
    q = R * s
    if dim == 2:
        return (1.0 - math.exp(-q) / i0e(q)) / sigma
    return (1.0 - 2.0 * q * math.exp(-q) / (-math.expm1(-2.0 * q))) / sigma


def _poisson_centered_raw(dim: int, R: float, sigma: float, s: float) -> float:
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        return 1.0 / (TWO_PI * R) if dim == 2 else 1.0 / (FOUR_PI * R * R)
    q = R * s
    if dim == 2:
        return math.exp(-q) / (TWO_PI * R * i0e(q))
    return 2.0 * q * math.exp(-q) / (FOUR_PI * R * R * (-math.expm1(-2.0 * q)))


def _v_2d(r: float, R: float, sigma: float, s: float) -> float:
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        return 1.0 / r
    rs = r * s
    q = R * s
    return s * (k1e(rs) * math.exp(-rs) + (k0e(q) / i0e(q)) * (i1e(rs) * math.exp(rs - 2.0 * q)))


def _v_3d(r: float, R: float, sigma: float, s: float) -> float:
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        return 1.0 / (r * r)
    rho = r * s
    q = R * s
    t2 = (math.exp(rho - 2.0 * q) * (1.0 - 1.0 / rho) + math.exp(-rho - 2.0 * q) * (1.0 + 1.0 / rho)) / (
        -math.expm1(-2.0 * q)
    )
    return (s / r) * (math.exp(-rho) * (1.0 + 1.0 / rho) + t2)


def _bracket_taylor(x: float) -> float:
    # cosh(x) - sinh(x)/x for small x, cancellation-free
    x2 = x * x
    return x2 / 3.0 + x2 * x2 / 30.0 + x2 * x2 * x2 / 840.0


def _grad_g_coeff(dim: int, r: float, R: float, sigma: float, s: float) -> float:
    # scalar W(r) such that grad_x G(x, y)|_{x=c} = W(r) * (y - c)
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        if dim == 2:
            return (1.0 / (r * r) - 1.0 / (R * R)) / TWO_PI
        return (1.0 / (r * r * r) - 1.0 / (R * R * R)) / FOUR_PI
    rho = r * s
    q = R * s
    if dim == 2:
        bracket = k1e(rho) * math.exp(-rho) - (k1e(q) / i1e(q)) * (i1e(rho) * math.exp(rho - 2.0 * q))
        return (s / (TWO_PI * r)) * bracket
    if q < 0.1:
        t2 = _bracket_taylor(rho) * math.exp(-q) * (1.0 + 1.0 / q) / _bracket_taylor(q)
    else:
        den = (1.0 - 1.0 / q) + math.exp(-2.0 * q) * (1.0 + 1.0 / q)
        t2 = (math.exp(rho - 2.0 * q) * (1.0 - 1.0 / rho) + math.exp(-rho - 2.0 * q) * (1.0 + 1.0 / rho)) * (
            1.0 + 1.0 / q
        ) / den
    return (s / (FOUR_PI * r * r)) * (math.exp(-rho) * (1.0 + 1.0 / rho) - t2)


def _grad_p_coeff(dim: int, R: float, sigma: float, s: float) -> float:
    # scalar C such that grad_x P(x, z)|_{x=c} = C * (z - c)
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        return 1.0 / (math.pi * R * R * R) if dim == 2 else 3.0 / (FOUR_PI * R * R * R * R)
    q = R * s
    if dim == 2:
        return sigma * math.exp(-q) / (TWO_PI * R * q * i1e(q))
    if q < 0.1:
        return sigma / (FOUR_PI * R * R * _bracket_taylor(q))
    den = (1.0 - 1.0 / q) + math.exp(-2.0 * q) * (1.0 + 1.0 / q)
    return sigma * 2.0 * math.exp(-q) / (FOUR_PI * R * R * den)


def _radial_density(dim: int, r: float, R: float, sigma: float, s: float, norm: float) -> float:
    # density of |y - c| under y ~ G / |G|, i.e. c_d r^(d-1) G(r) / |G|
    if r <= 0.0:
        return 0.0
    if sigma == 0.0 or R * s < _HARMONIC_Q:
        if dim == 2:
            return 4.0 * r * math.log(R / r) / (R * R)
        return 6.0 * r * (1.0 - r / R) / (R * R)
    if dim == 2:
        return r * _q_2d(r, R, s) / norm
    return r * _q_3d_r(r, R, s) / norm


def _envelope(R: float, sigma: float) -> float:
    # case-dependent radial bound h(R, sigma) for rejection sampling
    if sigma == 0.0:
        return 2.2 / R
    if R <= sigma:
        return max(2.2 * max(1.0 / R, 1.0 / sigma), 0.6 * max(math.sqrt(R), math.sqrt(sigma)))
    return max(2.2 * min(1.0 / R, 1.0 / sigma), 0.6 * min(math.sqrt(R), math.sqrt(sigma)))


# -- public operations ----------------------------------------------------

def green_centered(k: BallKernel, r: float) -> float:
    """G(x, y) for |y - x| = r with x at the ball center."""
    if r <= 0.0 or r > k.radius * (1.0 + 1e-9):
        raise ValueError(f"r = {r} outside (0, R] for R = {k.radius}")
    return _green_centered_raw(k.dim, r, k.radius, k.sigma, k.sqrt_sigma)


def green_norm(k: BallKernel) -> float:
    """Integral of G(x, .) over the ball, x at the center."""
    return _green_norm_raw(k.dim, k.radius, k.sigma, k.sqrt_sigma)


def poisson_centered(k: BallKernel) -> float:
    """P(x, z) for x at the center; constant over the sphere."""
    return _poisson_centered_raw(k.dim, k.radius, k.sigma, k.sqrt_sigma)


def _require_inside(k: BallKernel, p: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(p, dtype=float) - k.center
    if _dotv(v, v) >= k.radius * k.radius:
        raise ValueError(f"{name} is not strictly inside the ball")
    return v


def green_offcentered_series(k: BallKernel, x, y, n_terms: int) -> float:
    """Off-centered G by its eigenfunction series, truncated at n_terms.

    Terms whose relative contribution stays below 1e-14 twice in a row are
    dropped early; sigma = 0 returns the exact harmonic image form (the
    series' limit) directly.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    u = _require_inside(k, x, "x")
    v = _require_inside(k, y, "y")
    R = k.radius
    ru = _vnorm(u)
    rv = _vnorm(v)
    w = _vnorm(v - u)
    if w == 0.0:
        raise ValueError("x = y is singular")
    if k.sigma == 0.0 or R * k.sqrt_sigma < _HARMONIC_Q:
        # exact image form; with either point at the center it reduces to
        # the centered kernel
        if ru == 0.0 or rv == 0.0:
            r = max(ru, rv)
            return math.log(R / r) / TWO_PI if k.dim == 2 else (1.0 / r - 1.0 / R) / FOUR_PI
        image = math.sqrt(ru * ru * rv * rv - 2.0 * R * R * _dotv(u, v) + R ** 4) / R
        if k.dim == 2:
            return math.log(image / w) / TWO_PI
        return (1.0 / w - 1.0 / image) / FOUR_PI
    s = k.sqrt_sigma
    r_lo, r_hi = min(ru, rv), max(ru, rv)
    if r_lo == 0.0:
        cos_t = 1.0
    else:
        cos_t = max(-1.0, min(1.0, _dotv(u, v) / (ru * rv)))
    theta = math.acos(cos_t)
    a, b, q = r_lo * s, r_hi * s, R * s
    total = 0.0
    small_run = 0
    p_prev, p_cur = 1.0, cos_t
    for n in range(n_terms):
        if k.dim == 2:
            core = _series_term_2d(n, a, b, q)
            term = core if n == 0 else 2.0 * math.cos(n * theta) * core
        else:
            if n == 0:
                pn = 1.0
            elif n == 1:
                pn = cos_t
            else:
                p_prev, p_cur = p_cur, ((2 * n - 1) * cos_t * p_cur - (n - 1) * p_prev) / n
                pn = p_cur
            term = (2 * n + 1) * pn * _series_term_3d(n, a, b, q)
        total += term
        if abs(term) < 1e-14 * max(abs(total), 1e-300):
            small_run += 1
            if small_run >= 2 and n >= 8:
                break
        else:
            small_run = 0
    if k.dim == 2:
        return total / TWO_PI
    return s * total / FOUR_PI


def _log_iv(order: float, x: float) -> float:
    """log I_order(x); ascending series when the scaled form underflows."""
    v = ive(order, x)
    if v > 0.0:
        return math.log(v) + x
    lead = order * math.log(0.5 * x) - math.lgamma(order + 1.0)
    z = 0.25 * x * x
    total, term = 1.0, 1.0
    for m in range(1, 240):
        term *= z / (m * (order + m))
        total += term
        if term < 1e-17 * total:
            break
    return lead + math.log(total)


def _log_kv(order: float, x: float) -> float:
    """log K_order(x); large-order log forms when the scaled form overflows."""
    v = kve(order, x)
    if math.isfinite(v) and v > 0.0:
        return math.log(v) - x
    half = order - math.floor(order) > 0.25
    if half:
        # half-integer orders have an exact terminating sum, all positive
        n = int(round(order - 0.5))
        logs = [
            math.lgamma(n + m + 1.0) - math.lgamma(m + 1.0) - math.lgamma(n - m + 1.0) - m * math.log(2.0 * x)
            for m in range(n + 1)
        ]
        top = max(logs)
        return 0.5 * math.log(math.pi / (2.0 * x)) - x + top + math.log(sum(math.exp(t - top) for t in logs))
    n = int(round(order))
    # overflow only happens with order >> x, where the small-argument
    # expansion's leading factor carries all the magnitude
    lead = -math.log(2.0) + math.lgamma(n) + n * math.log(2.0 / x)
    z = 0.25 * x * x
    total, term = 1.0, 1.0
    for m in range(1, n):
        term *= -z / (m * (n - m))
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return lead + math.log(total)


def _bracket_from_logs(log_ia: float, log_kb: float, log_ib: float, log_kq: float, log_iq: float) -> float:
    main = math.exp(log_ia + log_kb) if log_ia + log_kb > -745.0 else 0.0
    refl_log = log_ia + log_ib + log_kq - log_iq
    refl = math.exp(refl_log) if math.isfinite(refl_log) and refl_log > -745.0 else 0.0
    return main - refl


def _series_term_2d(n: int, a: float, b: float, q: float) -> float:
    # I_n(a) (K_n(b) - (K_n(q)/I_n(q)) I_n(b)), log-recombined
    if a == 0.0:
        if n != 0:
            return 0.0
        log_ia = 0.0
    else:
        log_ia = _log_iv(float(n), a)
    return _bracket_from_logs(log_ia, _log_kv(float(n), b), _log_iv(float(n), b), _log_kv(float(n), q), _log_iv(float(n), q))


def _series_term_3d(n: int, a: float, b: float, q: float) -> float:
    # i_n(a) (k_n(b) - (k_n(q)/i_n(q)) i_n(b)), modified spherical Bessels
    nu = n + 0.5
    if a == 0.0:
        if n != 0:
            return 0.0
        log_ia = 0.0
    else:
        log_ia = 0.5 * math.log(math.pi / (2.0 * a)) + _log_iv(nu, a)
    log_kb = 0.5 * math.log(2.0 / (math.pi * b)) + _log_kv(nu, b)
    log_ib = 0.5 * math.log(math.pi / (2.0 * b)) + _log_iv(nu, b)
    log_kq = 0.5 * math.log(2.0 / (math.pi * q)) + _log_kv(nu, q)
    log_iq = 0.5 * math.log(math.pi / (2.0 * q)) + _log_iv(nu, q)
    return _bracket_from_logs(log_ia, log_kb, log_ib, log_kq, log_iq)


def green_offcentered_approx(k: BallKernel, x, y) -> float:
    """Closed-form off-centered G; exact when x is at the center."""
    u = _require_inside(k, x, "x")
    v = _require_inside(k, y, "y")
    R = k.radius
    w = _vnorm(v - u)
    if w == 0.0:
        raise ValueError("x = y is singular")
    arg2 = (R * R - _dotv(u, v)) / R
    if k.sigma == 0.0:
        if k.dim == 2:
            return math.log(arg2 / w) / TWO_PI
        return (1.0 / w - 1.0 / arg2) / FOUR_PI
    s = k.sqrt_sigma
    if k.dim == 2:
        return (_q_2d(w, R, s) - _q_2d(arg2, R, s)) / TWO_PI
    return (_q_3d_r(w, R, s) / w - _q_3d_r(arg2, R, s) / arg2) / FOUR_PI


def poisson_offcentered_approx(k: BallKernel, x, z) -> float:
    """Closed-form off-centered P; exact when x is at the center."""
    u = _require_inside(k, x, "x")
    v = np.asarray(z, dtype=float) - k.center
    R = k.radius
    rv = _vnorm(v)
    if abs(rv - R) > 1e-9 * R:
        raise ValueError("z is not on the ball boundary")
    w = _vnorm(v - u)
    uv = _dotv(u, v)
    arg2 = (R * R - uv) / R
    s = k.sqrt_sigma
    if k.dim == 2:
        first = _v_2d(w, R, k.sigma, s) * (R * R - uv) / (w * R)
        second = _v_2d(arg2, R, k.sigma, s) * uv / (R * R)
        return (first + second) / TWO_PI
    first = _v_3d(w, R, k.sigma, s) * (R * R - uv) / (w * R)
    second = _v_3d(arg2, R, k.sigma, s) * uv / (R * R)
    return (first + second) / FOUR_PI


def _iv_ratio(order: float, a: float, q: float) -> float:
    # I_order(a) / I_order(q) for 0 < a <= q, recombined in log space
    lg = _log_iv(order, a) - _log_iv(order, q)
    return math.exp(lg) if lg > -745.0 else 0.0


def poisson_offcentered_series(k: BallKernel, x, z, n_terms: int) -> float:
    """Off-centered P by its eigenfunction series, truncated at n_terms.

    The radial dependence is pure Bessel ratios I_n(s r)/I_n(s R)
    (modified spherical in 3D), each bounded by (r/R)^n, so the tail is
    dropped once terms sit below 1e-14 relative twice in a row; sigma = 0
    returns the exact harmonic Poisson kernel.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    u = _require_inside(k, x, "x")
    v = np.asarray(z, dtype=float) - k.center
    R = k.radius
    rv = _vnorm(v)
    if abs(rv - R) > 1e-9 * R:
        raise ValueError("z is not on the ball boundary")
    ru = _vnorm(u)
    if k.sigma == 0.0 or R * k.sqrt_sigma < _HARMONIC_Q:
        w = _vnorm(v - u)
        gap = R * R - ru * ru
        if k.dim == 2:
            return gap / (TWO_PI * R * w * w)
        return gap / (FOUR_PI * R * w * w * w)
    s = k.sqrt_sigma
    a, q = ru * s, R * s
    cos_t = 1.0 if ru == 0.0 else max(-1.0, min(1.0, _dotv(u, v) / (ru * R)))
    theta = math.acos(cos_t)
    total = 0.0
    small_run = 0
    p_prev, p_cur = 1.0, cos_t
    for n in range(n_terms):
        if k.dim == 2:
            if a == 0.0:
                ratio = math.exp(-_log_iv(0.0, q)) if n == 0 else 0.0
            else:
                ratio = _iv_ratio(float(n), a, q)
            term = ratio if n == 0 else 2.0 * math.cos(n * theta) * ratio
        else:
            if n == 0:
                pn = 1.0
            elif n == 1:
                pn = cos_t
            else:
                p_prev, p_cur = p_cur, ((2 * n - 1) * cos_t * p_cur - (n - 1) * p_prev) / n
                pn = p_cur
            if a == 0.0:
                if n == 0:
                    # i_0(q) = sinh(q)/q
                    log_i0 = q + math.log1p(-math.exp(-2.0 * q)) - math.log(2.0 * q)
                    ratio = math.exp(-log_i0)
                else:
                    ratio = 0.0
            else:
                ratio = math.sqrt(q / a) * _iv_ratio(n + 0.5, a, q)
            term = (2 * n + 1) * pn * ratio
        total += term
        if a == 0.0:
            break
        if abs(term) < 1e-14 * max(abs(total), 1e-300):
            small_run += 1
            if small_run >= 2 and n >= 8:
                break
        else:
            small_run = 0
    if k.dim == 2:
        return total / (TWO_PI * R)
    return total / (FOUR_PI * R * R)


def green_gradient_centered(k: BallKernel, y) -> np.ndarray:
    """grad_x G(x, y) at x = center; parallel to (y - x)."""
    v = _require_inside(k, y, "y")
    r = _vnorm(v)
    if r == 0.0:
        raise ValueError("y at the center is singular")
    return _grad_g_coeff(k.dim, r, k.radius, k.sigma, k.sqrt_sigma) * v


def poisson_gradient_centered(k: BallKernel, z) -> np.ndarray:
    """grad_x P(x, z) at x = center; parallel to (z - x)."""
    v = np.asarray(z, dtype=float) - k.center
    r = _vnorm(v)
    if abs(r - k.radius) > 1e-9 * k.radius:
        raise ValueError("z is not on the ball boundary")
    return _grad_p_coeff(k.dim, k.radius, k.sigma, k.sqrt_sigma) * v


def envelope_bound(R: float, sigma: float) -> float:
    """The rejection-sampling radial bound h(R, sigma)."""
    return _envelope(R, sigma)


def _unit_dir(dim: int, rng) -> tuple[float, ...]:
    # draw order is normative: 2D one angle draw; 3D height then angle
    if dim == 2:
        a = TWO_PI * rng.u()
        return (math.cos(a), math.sin(a))
    z = 1.0 - 2.0 * rng.u()
    a = TWO_PI * rng.u()
    rho = math.sqrt(max(0.0, 1.0 - z * z))
    return (rho * math.cos(a), rho * math.sin(a), z)


def _sample_radius(dim: int, R: float, sigma: float, s: float, norm: float, rng) -> tuple[float, int]:
    # two draws per trial: candidate radius, then the accept test
    global envelope_violations
    h = _envelope(R, sigma)
    for trial in range(1, 10001):
        r = R * rng.u()
        d = _radial_density(dim, r, R, sigma, s, norm)
        if d > h:
            envelope_violations += 1
        if rng.u() * h <= d:
            return r, trial
    raise EnvelopeError(f"10000 consecutive rejections at R = {R}, sigma = {sigma}")


def sample_green_centered(k: BallKernel, rng) -> tuple[np.ndarray, float]:
    """Draw y ~ G(x, .)/|G| around the center; returns (y, density at y)."""
    norm = green_norm(k)
    r, _ = _sample_radius(k.dim, k.radius, k.sigma, k.sqrt_sigma, norm, rng)
    d = _unit_dir(k.dim, rng)
    y = k.center + r * np.asarray(d)
    pdf = _green_centered_raw(k.dim, r, k.radius, k.sigma, k.sqrt_sigma) / norm
    return y, pdf


def sample_sphere_uniform(dim: int, R: float, rng) -> np.ndarray:
    """Uniform point on the origin-centered sphere of radius R."""
    if R <= 0.0:
        raise ValueError(f"R must be positive, got {R}")
    return R * np.asarray(_unit_dir(dim, rng))
