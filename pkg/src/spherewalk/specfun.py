"""Scalar special functions backing the ball-kernel expressions.

Modified Bessel functions of integer order and Legendre polynomials, with
the domain checks the kernel formulas rely on. The accuracy contract is
relative error at or below 1e-12 for the argument ranges the kernels
produce; scipy's Cephes-backed implementations meet it, so these are thin
validated wrappers rather than hand-rolled series.

Half-integer orders are deliberately not exposed: every I_{1/2}, K_{3/2}
use in the 3D kernels reduces to exponential/sinh forms and is written out
that way in the kernels module.
"""

from __future__ import annotations

import scipy.special as _sp

__all__ = ["bessel_I", "bessel_K", "legendre_P"]


def bessel_I(order: int, x: float) -> float:
    """Modified Bessel function of the first kind, I_0 or I_1."""
    if order not in (0, 1):
        raise ValueError(f"unsupported Bessel order {order}; only 0 and 1 here")
    if x < 0.0:
        raise ValueError(f"bessel_I needs x >= 0, got {x}")
    return float(_sp.i0(x)) if order == 0 else float(_sp.i1(x))


def bessel_K(order: int, x: float) -> float:
    """Modified Bessel function of the second kind, K_0 or K_1."""
    if order not in (0, 1):
        raise ValueError(f"unsupported Bessel order {order}; only 0 and 1 here")
    if x <= 0.0:
        raise ValueError(f"bessel_K needs x > 0, got {x}")
    return float(_sp.k0(x)) if order == 0 else float(_sp.k1(x))


def legendre_P(n: int, t: float) -> float:
    """Legendre polynomial P_n(t) by the three-term recurrence."""
    if n < 0:
        raise ValueError(f"legendre_P needs n >= 0, got {n}")
    if not -1.0 <= t <= 1.0:
        raise ValueError(f"legendre_P needs |t| <= 1, got {t}")
    if n == 0:
        return 1.0
    p_prev, p = 1.0, t
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p
