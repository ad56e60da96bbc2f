"""Independent oracles for the special-function layer.

Computes reference values by routes that share no code with the package:
modified Bessel I by its power series, K by its integral representation,
Legendre by the bare three-term recurrence. Run this script and paste the
printed values into tests as frozen constants.
"""

import math

from scipy.integrate import quad


def bessel_i_series(order: int, x: float) -> float:
    # I_nu(x) = sum_k (x/2)^(2k+nu) / (k! (k+nu)!)
    total = 0.0
    term_log_scale = 1.0
    half = x / 2.0
    for k in range(0, 400):
        log_term = (2 * k + order) * math.log(half) if x > 0 else (0.0 if 2 * k + order == 0 else -math.inf)
        log_term -= math.lgamma(k + 1) + math.lgamma(k + order + 1)
        term = math.exp(log_term) if log_term > -745 else 0.0
        total += term
        if term < 1e-18 * max(total, 1.0) and k > 4:
            break
    return total * term_log_scale


def bessel_k_integral(order: int, x: float) -> float:
    # K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
    def integrand(t: float) -> float:
        return math.exp(-x * math.cosh(t)) * math.cosh(order * t)

    val, err = quad(integrand, 0.0, 60.0, limit=400, epsabs=1e-15, epsrel=1e-14)
    assert err < 1e-12
    return val


def legendre_recurrence(n: int, t: float) -> float:
    if n == 0:
        return 1.0
    p_prev, p = 1.0, t
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p


def main() -> None:
    print("I0(1)  =", repr(bessel_i_series(0, 1.0)))
    print("I1(1)  =", repr(bessel_i_series(1, 1.0)))
    print("I0(0.5)=", repr(bessel_i_series(0, 0.5)))
    print("I1(0.5)=", repr(bessel_i_series(1, 0.5)))
    print("I0(2)  =", repr(bessel_i_series(0, 2.0)))
    print("K0(1)  =", repr(bessel_k_integral(0, 1.0)))
    print("K1(1)  =", repr(bessel_k_integral(1, 1.0)))
    print("K0(0.5)=", repr(bessel_k_integral(0, 0.5)))
    print("K1(0.5)=", repr(bessel_k_integral(1, 0.5)))
    print("K0(50) =", repr(bessel_k_integral(0, 50.0)))
    for x in (0.1, 1.0, 5.0, 20.0):
        w = bessel_i_series(0, x) * bessel_k_integral(1, x) + bessel_i_series(1, x) * bessel_k_integral(0, x)
        print(f"wronskian({x}) - 1/x =", repr(w - 1.0 / x))
    print("P2(0.5) =", repr(legendre_recurrence(2, 0.5)))
    print("P3(0.5) =", repr(legendre_recurrence(3, 0.5)))
    print("P5(-0.3)=", repr(legendre_recurrence(5, -0.3)))
    # half-integer closed forms used by the 3D kernels
    for x in (0.5, 1.0, 3.0):
        i_half = math.sqrt(2.0 / (math.pi * x)) * math.sinh(x)
        k_half = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x)
        print(f"I_1/2({x}) =", repr(i_half), " K_1/2({x}) =".replace("{x}", str(x)), repr(k_half))


if __name__ == "__main__":
    main()
