"""Coefficient-field catalog: closed-form derivatives vs finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherewalk.fields import (
    Constant,
    Exponential,
    GaussianBump,
    Linear,
    ProductField,
    Sinusoid,
    SumField,
)

RNG = np.random.default_rng(20240822)


def catalog(dim):
    """One representative of every kind, plus nested composites."""
    b = RNG.uniform(-1.0, 1.0, size=dim)
    c = RNG.uniform(-0.8, 0.8, size=dim)
    k = RNG.uniform(-2.0, 2.0, size=dim)
    ctr = RNG.uniform(-0.5, 0.5, size=dim)
    bump = GaussianBump(center=ctr, amplitude=1.7, width=0.8, baseline=0.4)
    sine = Sinusoid(amplitude=0.9, frequency=k, phase=0.3, offset=1.2)
    fields = [
        Constant(2.5),
        Linear(1.1, b),
        Exponential(c),
        bump,
        sine,
        SumField((bump, sine, Constant(0.5))),
        ProductField(bump, sine),
        ProductField(Exponential(c), SumField((sine, Constant(2.0)))),
    ]
    return fields


def fd_gradient(field, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (field.value(x + e) - field.value(x - e)) / (2.0 * h)
    return g


def fd_laplacian(field, x, h):
    v0 = field.value(x)
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        total += (field.value(x + e) - 2.0 * v0 + field.value(x - e)) / (h * h)
    return total


@pytest.mark.parametrize("dim", [2, 3])
def test_gradient_matches_central_differences(dim):
    for field in catalog(dim):
        for _ in range(10):
            x = RNG.uniform(-1.0, 1.0, size=dim)
            exact = field.gradient(x)
            fd = fd_gradient(field, x, 1e-6)
            assert np.all(np.abs(fd - exact) <= 1e-6 * np.maximum(1.0, np.abs(exact)))


@pytest.mark.parametrize("dim", [2, 3])
def test_laplacian_matches_second_differences(dim):
    for field in catalog(dim):
        for _ in range(10):
            x = RNG.uniform(-1.0, 1.0, size=dim)
            exact = field.laplacian(x)
            fd = fd_laplacian(field, x, 1e-4)
            assert abs(fd - exact) <= 1e-4 * max(1.0, abs(exact))


def test_constant_and_linear_values():
    f = Constant(3.25)
    x = np.array([0.4, -2.0])
    assert f.value(x) == 3.25
    assert np.all(f.gradient(x) == 0.0)
    assert f.laplacian(x) == 0.0

    g = Linear(2.0, np.array([1.0, -0.5]))
    assert g.value(x) == 2.0 + 0.4 + 1.0
    assert np.all(g.gradient(x) == np.array([1.0, -0.5]))
    assert g.laplacian(x) == 0.0


def test_exponential_closed_forms():
    c = np.array([2.0, 0.0])
    f = Exponential(c)
    x = np.array([0.3, 0.7])
    v = math.exp(0.6)
    assert f.value(x) == pytest.approx(v, rel=1e-15)
    assert np.allclose(f.gradient(x), c * v, rtol=1e-15)
    assert f.laplacian(x) == pytest.approx(4.0 * v, rel=1e-15)


def test_gaussian_bump_stationary_point():
    ctr = np.array([0.2, -0.1, 0.4])
    f = GaussianBump(center=ctr, amplitude=2.0, width=0.6, baseline=0.5)
    assert f.value(ctr) == pytest.approx(2.5, rel=1e-15)
    assert np.all(f.gradient(ctr) == 0.0)
    # at the peak: lap = -amplitude * dim / width^2
    assert f.laplacian(ctr) == pytest.approx(-2.0 * 3 / 0.36, rel=1e-14)


def test_sinusoid_closed_forms():
    k = np.array([3.0, -1.0])
    f = Sinusoid(amplitude=2.0, frequency=k, phase=0.25, offset=1.0)
    x = np.array([0.1, 0.2])
    arg = 0.3 - 0.2 + 0.25
    assert f.value(x) == pytest.approx(1.0 + 2.0 * math.sin(arg), rel=1e-15)
    assert np.allclose(f.gradient(x), 2.0 * math.cos(arg) * k, rtol=1e-15)
    assert f.laplacian(x) == pytest.approx(-10.0 * 2.0 * math.sin(arg), rel=1e-14)


def test_sum_and_product_compose():
    a = Sinusoid(amplitude=1.0, frequency=np.array([1.0, 2.0]))
    b = Exponential(np.array([0.5, -0.25]))
    x = np.array([0.7, -0.3])
    s = SumField((a, b))
    p = ProductField(a, b)
    assert s.value(x) == pytest.approx(a.value(x) + b.value(x), rel=1e-15)
    assert p.value(x) == pytest.approx(a.value(x) * b.value(x), rel=1e-15)
    assert np.allclose(p.gradient(x),
                       a.value(x) * b.gradient(x) + b.value(x) * a.gradient(x),
                       rtol=1e-14)
    # operator sugar builds the same composites
    assert (a + b).value(x) == s.value(x)
    assert (a * b).value(x) == p.value(x)


def test_field_validation_errors():
    with pytest.raises(ValueError):
        GaussianBump(center=np.array([0.0, 0.0]), amplitude=1.0, width=0.0)
    with pytest.raises(ValueError):
        SumField((Constant(1.0),))
    with pytest.raises(ValueError):
        Linear(1.0, np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(
    amp=st.floats(-3.0, 3.0),
    width=st.floats(0.3, 3.0),
    base=st.floats(0.5, 2.0),
    cx=st.floats(-1.0, 1.0),
    cy=st.floats(-1.0, 1.0),
    px=st.floats(-1.5, 1.5),
    py=st.floats(-1.5, 1.5),
)
def test_bump_derivatives_property(amp, width, base, cx, cy, px, py):
    f = GaussianBump(center=np.array([cx, cy]), amplitude=amp, width=width, baseline=base)
    x = np.array([px, py])
    fd = fd_gradient(f, x, 1e-6)
    exact = f.gradient(x)
    assert np.all(np.abs(fd - exact) <= 1e-6 * np.maximum(1.0, np.abs(exact)))
    assert abs(fd_laplacian(f, x, 1e-4) - f.laplacian(x)) <= 1e-4 * max(1.0, abs(f.laplacian(x)))


def test_fields_do_not_mutate_input_arrays():
    x = np.array([0.3, 0.4])
    before = x.copy()
    for field in catalog(2):
        field.value(x)
        field.gradient(x)
        field.laplacian(x)
    assert np.all(x == before)
