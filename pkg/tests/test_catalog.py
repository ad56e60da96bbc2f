"""Catalog entries: well-posedness and the regimes they claim to cover."""

import numpy as np
import pytest

from spherewalk.catalog import catalog, screening_family
from spherewalk.problem import transform, validate_drift_potential


@pytest.fixture(scope="module")
def entries():
    return catalog()


def test_catalog_has_six_entries_matching_scene_dims(entries):
    assert len(entries) == 6
    for e in entries.values():
        assert e.scene.dim == len(e.probes[0])
        assert len(e.probes) == 5


def test_probes_are_interior(entries):
    for e in entries.values():
        for p in e.probes:
            assert e.scene.inside(np.asarray(p, dtype=float))


def test_coefficients_are_admissible_on_a_grid(entries):
    rng = np.random.default_rng(4)
    for e in entries.values():
        pts = rng.uniform(-0.69, 0.69, size=(200, e.scene.dim))
        for x in pts:
            assert e.problem.alpha.value(x) > 0.0
            assert e.problem.sigma.value(x) >= 0.0


def test_references_are_order_one(entries):
    for e in entries.values():
        vals = np.array(e.reference_values())
        assert np.all(np.isfinite(vals))
        assert np.max(np.abs(vals)) < 3.0
        assert np.max(np.abs(vals)) > 0.05


def test_bump2d_reaches_negative_sigma_prime(entries):
    e = entries["bump2d"]
    t = transform(e.problem, e.scene)
    assert t.sigma_prime_min < -3.0
    assert t.sigma_bar > 5.0


def test_screened2d_is_strongly_absorbing(entries):
    e = entries["screened2d"]
    t = transform(e.problem, e.scene)
    assert t.sigma_prime_min > 0.0
    assert t.sigma_prime_max > 25.0


def test_drift_entries_have_consistent_potentials(entries):
    for name in ("drift2d", "drift3d"):
        e = entries[name]
        report = validate_drift_potential(e.problem, e.scene)
        assert report["fd_gradient_max_dev"] < 1e-6
        assert np.any(e.problem.omega(np.zeros(e.scene.dim) + 0.1) != 0.0)


def test_screening_family_shifts_only_the_offset():
    base = screening_family(0.0)
    high = screening_family(40.0)
    t0 = transform(base.problem, base.scene)
    t1 = transform(high.problem, high.scene)
    assert t1.sigma_prime_max == pytest.approx(t0.sigma_prime_max + 40.0, abs=1e-9)
    assert t1.sigma_bar == pytest.approx(t0.sigma_bar, abs=1e-9)
    x = np.array([0.3, -0.2])
    assert base.problem.reference.value(x) == high.problem.reference.value(x)
    with pytest.raises(ValueError):
        screening_family(-1.0)
