"""Problem transform, screening bound, drift and conformal adapters.

Symbolic reference values come from tests/oracles/oracle_transform.py,
which verifies the substitution identity and the worked reductions with
sympy and prints the frozen sigma' anchors embedded below.
"""

import math

import numpy as np
import pytest

from spherewalk.fields import (
    Constant,
    Exponential,
    GaussianBump,
    Linear,
    ProductField,
    Sinusoid,
    SumField,
)
from spherewalk.geometry import Scene, SphereSDF
from spherewalk.problem import (
    DriftConsistencyError,
    ManufacturedSource,
    Problem,
    conformal_adapter,
    manufactured_problem,
    shifted_sigma_for_kernels,
    sigma_bar_default,
    stratified_interior_points,
    transform,
    validate_drift_potential,
)

RNG = np.random.default_rng(77)

# oracle_transform.py, gaussian-bump alpha = 0.5 + 2 exp(-|x-(0.2,-0.1)|^2/(2*0.6^2)),
# sigma = 0.4, no drift
BUMP_ANCHORS = [
    ((0.0, 0.0), -1.9294974074473707),
    ((0.5, -0.3), -1.7158046752546302),
    ((-0.7, 0.4), 0.57664561867032011),
]

BUMP_ALPHA = GaussianBump(center=np.array([0.2, -0.1]), amplitude=2.0, width=0.6,
                          baseline=0.5)


def disk_scene(dim=2, radius=1.0):
    return Scene(dim=dim, boundary=SphereSDF(center=np.zeros(dim), radius=radius),
                 epsilon=1e-3)


def disk_points(n, radius=0.9, dim=2):
    pts = []
    while len(pts) < n:
        p = RNG.uniform(-radius, radius, size=dim)
        if np.linalg.norm(p) < radius:
            pts.append(p)
    return pts


def trivial(c=0.0):
    return Constant(c)


def test_exponential_alpha_gives_unit_screening():
    p = Problem(alpha=Exponential(np.array([2.0, 0.0])), sigma=trivial(),
                f=trivial(), g=trivial())
    t = transform(p)
    for x in disk_points(50):
        assert t.sigma_prime(x) == pytest.approx(1.0, rel=1e-12)


def test_constant_alpha_reductions():
    a = 3.7
    sig = Sinusoid(amplitude=0.4, frequency=np.array([2.0, 1.0]), offset=0.8)
    f = Sinusoid(amplitude=1.1, frequency=np.array([1.0, -1.0]), phase=0.2)
    g = Linear(0.5, np.array([1.0, 2.0]))
    t = transform(Problem(alpha=Constant(a), sigma=sig, f=f, g=g))
    for x in disk_points(20):
        assert t.sigma_prime(x) == pytest.approx(sig.value(x) / a, rel=1e-14)
        assert t.f_prime(x) == pytest.approx(f.value(x) / math.sqrt(a), rel=1e-14)
        assert t.g_prime(x) == pytest.approx(math.sqrt(a) * g.value(x), rel=1e-14)


def sigma_prime_divergence_form(alpha, sigma, x):
    """sigma/alpha + (lap(alpha)/alpha - |grad ln alpha|^2 / 2) / 2"""
    a = alpha.value(x)
    gla = alpha.gradient(x) / a
    return sigma.value(x) / a + 0.5 * (alpha.laplacian(x) / a - 0.5 * float(gla @ gla))


def test_two_sigma_prime_forms_agree():
    sig = Constant(0.4)
    t = transform(Problem(alpha=BUMP_ALPHA, sigma=sig, f=trivial(), g=trivial()))
    for x in disk_points(100):
        other = sigma_prime_divergence_form(BUMP_ALPHA, sig, x)
        assert abs(t.sigma_prime(x) - other) <= 1e-10 * max(1.0, abs(other))


def test_sigma_prime_frozen_anchors():
    t = transform(Problem(alpha=BUMP_ALPHA, sigma=Constant(0.4), f=trivial(), g=trivial()))
    for pt, want in BUMP_ANCHORS:
        assert t.sigma_prime(np.array(pt)) == pytest.approx(want, rel=1e-12)


def _alpha_catalog():
    sine_pos = Sinusoid(amplitude=0.5, frequency=np.array([2.0, 1.0]), offset=1.5)
    return [
        Constant(1.7),
        Linear(2.0, np.array([0.25, -0.15])),
        Exponential(np.array([0.5, -0.3])),
        BUMP_ALPHA,
        sine_pos,
        ProductField(BUMP_ALPHA, sine_pos),
        SumField((BUMP_ALPHA, Constant(0.25))),
    ]


def fd_laplacian(fn, x, h):
    v0 = fn(x)
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        total += (fn(x + e) - 2.0 * v0 + fn(x - e)) / (h * h)
    return total


def test_substitution_identity_per_catalog_alpha():
    """Applying lap - sigma' to U = e^gamma u reproduces the original
    operator up to the e^gamma/alpha factor."""
    u = Sinusoid(amplitude=1.3, frequency=np.array([1.5, -0.8]), phase=0.4, offset=0.2)
    gw = Sinusoid(amplitude=0.25, frequency=np.array([1.0, 0.5]))
    sig = Constant(0.3)
    for alpha in _alpha_catalog():
        p = Problem(alpha=alpha, sigma=sig, f=trivial(), g=trivial(), drift_potential=gw)
        t = transform(p)

        def big_u(x):
            return math.exp(t.gamma(x)) * u.value(x)

        for x in disk_points(20):
            lhs = fd_laplacian(big_u, x, 1e-4) - t.sigma_prime(x) * big_u(x)
            gu = u.gradient(x)
            divergence_form = (
                alpha.value(x) * u.laplacian(x)
                + float(alpha.gradient(x) @ gu)
                + float(p.omega(x) @ gu)
                - sig.value(x) * u.value(x)
            )
            rhs = math.exp(t.gamma(x)) / alpha.value(x) * divergence_form
            assert abs(lhs - rhs) <= 1e-5 * max(1.0, abs(rhs))


def test_stratified_probes_deterministic_and_inside():
    scene = disk_scene()
    a = stratified_interior_points(scene, 256)
    b = stratified_interior_points(scene, 256)
    assert np.array_equal(a, b)
    assert a.shape[1] == 2 and len(a) > 100
    for p in a:
        assert scene.inside(p)


def test_stratified_probes_3d_and_extra():
    scene = disk_scene(dim=3)
    pts = stratified_interior_points(scene, 512)
    assert pts.shape[1] == 3 and len(pts) > 100
    withx = stratified_interior_points(scene, 64, extra=[np.zeros(3), np.array([5.0, 0.0, 0.0])])
    # interior extra point appended, exterior one dropped
    assert np.any(np.all(withx == 0.0, axis=1))
    assert len(withx) == len(stratified_interior_points(scene, 64)) + 1
    with pytest.raises(ValueError):
        stratified_interior_points(scene, 0)


def test_sigma_bar_covers_sinusoid_range():
    # sigma' = sigma spans [0, 10]; probes resolve the extremes to grid accuracy
    sig = Sinusoid(amplitude=5.0, frequency=np.array([4.0, 2.5]), phase=0.3, offset=5.0)
    t = transform(Problem(alpha=Constant(1.0), sigma=sig, f=trivial(), g=trivial()))
    scene = disk_scene()
    bar = sigma_bar_default(t, scene)
    assert bar == t.sigma_prime_max - t.sigma_prime_min
    assert 9.7 <= bar <= 10.0
    # spread bound dominates the shifted field at every probe
    probes = stratified_interior_points(scene, 4096)
    vals = np.array([t.sigma_prime(p) for p in probes])
    assert np.all(bar - (vals - vals.min()) >= -1e-12)


def test_sigma_bar_constant_falls_back_to_max():
    t = transform(Problem(alpha=Constant(1.0), sigma=Constant(3.0), f=trivial(), g=trivial()))
    assert sigma_bar_default(t, disk_scene()) == 3.0
    assert t.sigma_prime_min == t.sigma_prime_max == 3.0


def test_sigma_bar_laplace_positivity_floor():
    t = transform(Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial()))
    # scene scale is 1, so the floor is 1e-6 exactly
    assert sigma_bar_default(t, disk_scene()) == 1e-6


def test_kernel_screening_dominates_nonnegative_sigma_prime():
    sig = Sinusoid(amplitude=1.5, frequency=np.array([4.0, 2.5]), offset=3.5)
    t = transform(Problem(alpha=Constant(1.0), sigma=sig, f=trivial(), g=trivial()))
    scene = disk_scene()
    sigma_bar_default(t, scene)
    sc = shifted_sigma_for_kernels(t)
    assert sc == t.sigma_prime_max
    assert 4.7 <= sc <= 5.0
    probes = stratified_interior_points(scene, 4096)
    weights = np.array([1.0 - t.sigma_prime(p) / sc for p in probes])
    assert np.all(weights >= 0.0) and np.all(weights <= 1.0)


def test_kernel_screening_with_negative_sigma_prime():
    # bump alpha drives sigma' below zero near the peak; the spread bound
    # then exceeds the max, null weights stay nonnegative but pass 1
    t = transform(Problem(alpha=BUMP_ALPHA, sigma=Constant(0.4), f=trivial(), g=trivial()))
    scene = disk_scene()
    sigma_bar_default(t, scene)
    assert t.sigma_prime_min < 0.0
    sc = shifted_sigma_for_kernels(t)
    assert sc == t.sigma_bar
    assert sc >= t.sigma_prime_max
    probes = stratified_interior_points(scene, 4096)
    weights = np.array([1.0 - t.sigma_prime(p) / sc for p in probes])
    assert np.all(weights >= 0.0)
    assert weights.max() > 1.0


def test_kernel_screening_requires_probing_first():
    t = transform(Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial()))
    with pytest.raises(ValueError):
        shifted_sigma_for_kernels(t)


def test_probe_validation_rejects_bad_coefficients():
    losing_alpha = Problem(alpha=Linear(0.5, np.array([1.0, 0.0])), sigma=trivial(),
                           f=trivial(), g=trivial())
    with pytest.raises(ValueError, match="alpha"):
        transform(losing_alpha, disk_scene())
    negative_sigma = Problem(alpha=Constant(1.0), sigma=Constant(-0.1),
                             f=trivial(), g=trivial())
    with pytest.raises(ValueError, match="sigma"):
        transform(negative_sigma, disk_scene())


def test_drift_from_linear_potential_is_constant():
    b = np.array([0.7, -0.4])
    p = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial(),
                drift_potential=Linear(0.0, b / 2.0),
                declared_omega=(Constant(0.7), Constant(-0.4)))
    report = validate_drift_potential(p, disk_scene())
    assert report["declared_omega_max_dev"] <= 1e-12
    for x in disk_points(10):
        assert np.allclose(p.omega(x), b, rtol=0, atol=1e-15)


def test_drift_declared_mismatch_raises():
    p = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial(),
                drift_potential=Linear(0.0, np.array([0.35, -0.2])),
                declared_omega=(Constant(0.7001), Constant(-0.4)))
    with pytest.raises(DriftConsistencyError):
        validate_drift_potential(p, disk_scene())


def test_drift_sinusoid_matches_finite_differences():
    p = Problem(alpha=Exponential(np.array([0.4, 0.1])), sigma=trivial(),
                f=trivial(), g=trivial(),
                drift_potential=Sinusoid(amplitude=0.3, frequency=np.array([1.5, 1.0])))
    report = validate_drift_potential(p, disk_scene())
    assert report["fd_gradient_max_dev"] <= 1e-8
    # omega really is 2 alpha grad gamma_w
    for x in disk_points(10):
        expect = 2.0 * p.alpha.value(x) * p.drift_potential.gradient(x)
        assert np.allclose(p.omega(x), expect, rtol=1e-15)


def test_drift_validation_requires_potential():
    p = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial())
    assert np.all(p.omega(np.array([0.1, 0.2])) == 0.0)
    with pytest.raises(ValueError):
        validate_drift_potential(p, disk_scene())


def test_conformal_identity_scale():
    base = Problem(alpha=Constant(1.0), sigma=Constant(0.5),
                   f=Constant(1.0), g=Constant(2.0), conformal_scale=Constant(1.0))
    adapted = conformal_adapter(base)
    assert adapted.conformal_scale is None
    t0 = transform(Problem(alpha=Constant(1.0), sigma=Constant(0.5),
                           f=Constant(1.0), g=Constant(2.0)))
    t1 = transform(adapted)
    for x in disk_points(10):
        assert adapted.alpha.value(x) == 1.0
        assert t1.sigma_prime(x) == pytest.approx(t0.sigma_prime(x), rel=1e-14)
        assert t1.f_prime(x) == pytest.approx(t0.f_prime(x), rel=1e-14)


def test_conformal_constant_scale_keeps_harmonic_solution():
    g = Linear(0.5, np.array([1.0, -2.0]))
    base = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=g,
                   conformal_scale=Constant(2.0))
    adapted = conformal_adapter(base)
    t = transform(adapted)
    for x in disk_points(10):
        assert adapted.alpha.value(x) == pytest.approx(4.0, rel=1e-15)
        assert t.sigma_prime(x) == pytest.approx(0.0, abs=1e-15)
        # recovering u = e^{-gamma} U leaves the boundary data untouched
        assert math.exp(-t.gamma(x)) * t.g_prime(x) == pytest.approx(g.value(x), rel=1e-14)


def test_conformal_exponential_scale_chains_to_unit_screening():
    base = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial(),
                   conformal_scale=Exponential(np.array([1.0, 0.0])))
    adapted = conformal_adapter(base)
    t = transform(adapted)
    for x in disk_points(50):
        assert adapted.alpha.value(x) == pytest.approx(math.exp(2.0 * x[0]), rel=1e-13)
        assert t.sigma_prime(x) == pytest.approx(1.0, rel=1e-12)


def test_conformal_adapter_without_scale_is_identity():
    p = Problem(alpha=Constant(1.0), sigma=trivial(), f=trivial(), g=trivial())
    assert conformal_adapter(p) is p


def test_manufactured_source_matches_divergence_form():
    u_ref = Sinusoid(amplitude=1.2, frequency=np.array([1.5, -0.8]), phase=0.4, offset=0.2)
    gw = Linear(0.0, np.array([0.1, -0.2]))
    p = manufactured_problem(BUMP_ALPHA, Constant(0.3), u_ref, drift_potential=gw)
    assert p.reference is u_ref
    h = 1e-6

    def flux(x, k):
        return p.alpha.value(x) * u_ref.gradient(x)[k]

    for x in disk_points(15):
        div = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            div += (flux(x + e, k) - flux(x - e, k)) / (2.0 * h)
        gu = u_ref.gradient(x)
        fd_f = -div - float(p.omega(x) @ gu) + p.sigma.value(x) * u_ref.value(x)
        assert p.f.value(x) == pytest.approx(fd_f, rel=1e-6, abs=1e-8)
        assert p.g.value(x) == u_ref.value(x)


def test_manufactured_problem_solves_transformed_equation():
    """Full-chain check: U = e^gamma u_ref satisfies lap U - sigma' U = -f'."""
    u_ref = Sinusoid(amplitude=1.2, frequency=np.array([1.5, -0.8]), phase=0.4, offset=0.2)
    p = manufactured_problem(BUMP_ALPHA, Constant(0.3), u_ref,
                             drift_potential=Linear(0.0, np.array([0.1, -0.2])))
    t = transform(p)

    def big_u(x):
        return math.exp(t.gamma(x)) * u_ref.value(x)

    for x in disk_points(10):
        resid = fd_laplacian(big_u, x, 1e-4) - t.sigma_prime(x) * big_u(x) + t.f_prime(x)
        assert abs(resid) <= 1e-5 * max(1.0, abs(t.f_prime(x)))


def test_manufactured_source_is_value_only():
    src = ManufacturedSource(Constant(1.0), Constant(0.0),
                             Sinusoid(amplitude=1.0, frequency=np.array([1.0, 0.0])))
    x = np.array([0.1, 0.2])
    assert isinstance(src.value(x), float)
    with pytest.raises(NotImplementedError):
        src.gradient(x)
    with pytest.raises(NotImplementedError):
        src.laplacian(x)
