"""Rejection sampling of the Green radial law and sphere sampling."""

import math

import numpy as np
import pytest

from spherewalk import kernels as K
from spherewalk._philox import PhiloxStream


def ball(dim, R=1.0, sigma=1.0):
    return K.BallKernel(center=np.zeros(dim), radius=R, sigma=sigma, dim=dim)


@pytest.mark.parametrize("dim,R,sigma", [(2, 1.0, 2.0), (3, 1.0, 2.0), (3, 2.0, 20.0), (2, 0.5, 0.0)])
def test_radius_histogram_matches_density(dim, R, sigma):
    k = ball(dim, R=R, sigma=sigma)
    norm = K.green_norm(k)
    s = math.sqrt(sigma)
    rng = PhiloxStream(seed=7, stream_id=dim * 100 + int(sigma))
    n = 200_000
    rs = np.empty(n)
    for i in range(n):
        rs[i], _ = K._sample_radius(dim, R, sigma, s, norm, rng)
    hist, edges = np.histogram(rs, bins=50, range=(0.0, R))
    mids = 0.5 * (edges[:-1] + edges[1:])
    expected = np.array([K._radial_density(dim, m, R, sigma, s, norm) for m in mids]) * (R / 50) * n
    assert np.max(np.abs(hist - expected)) / math.sqrt(n) < 4.0


@pytest.mark.parametrize("dim", [2, 3])
def test_acceptance_rate_matches_envelope(dim):
    # mean trials per accept is R * h by construction of the rejection loop
    R, sigma = 1.0, 2.0
    k = ball(dim, R=R, sigma=sigma)
    norm = K.green_norm(k)
    rng = PhiloxStream(seed=11, stream_id=dim)
    total = 0
    n = 20_000
    for _ in range(n):
        _, trials = K._sample_radius(dim, R, sigma, math.sqrt(sigma), norm, rng)
        total += trials
    predicted = R * K.envelope_bound(R, sigma)
    assert total / n == pytest.approx(predicted, rel=0.05)


def test_envelope_never_violated_on_grid():
    # fine radial scan over the supported (R, sigma) grid, both dimensions
    for dim in (2, 3):
        for R in (0.1, 1.0, 10.0):
            for sigma in (0.0, 0.1, 1.0, 10.0):
                k = ball(dim, R=R, sigma=sigma)
                norm = K.green_norm(k)
                s = math.sqrt(sigma)
                h = K.envelope_bound(R, sigma)
                rr = np.linspace(0.0, R, 2001)[1:]
                dens = [K._radial_density(dim, float(r), R, sigma, s, norm) for r in rr]
                assert max(dens) <= h


def test_sampler_is_deterministic_per_stream():
    k = ball(3, sigma=4.0)
    norm = K.green_norm(k)
    a = PhiloxStream(seed=5, stream_id=9)
    b = PhiloxStream(seed=5, stream_id=9)
    seq_a = [K._sample_radius(3, 1.0, 4.0, 2.0, norm, a) for _ in range(50)]
    seq_b = [K._sample_radius(3, 1.0, 4.0, 2.0, norm, b) for _ in range(50)]
    assert seq_a == seq_b
    c = PhiloxStream(seed=5, stream_id=9, lane=1)
    seq_c = [K._sample_radius(3, 1.0, 4.0, 2.0, norm, c) for _ in range(50)]
    assert seq_c != seq_a


def test_sample_point_inside_ball_with_positive_density():
    k = K.BallKernel(center=np.array([1.0, -2.0, 0.5]), radius=0.7, sigma=3.0, dim=3)
    rng = PhiloxStream(seed=3, stream_id=9)
    for _ in range(200):
        y, pdf = K.sample_green_centered(k, rng)
        assert np.linalg.norm(y - k.center) < 0.7
        assert pdf > 0.0


class _AlwaysReject:
    # u() = 0.9999999 puts the radius draw in the vanishing tail of the
    # density and then fails the accept test every time
    def u(self):
        return 0.9999999


def test_rejection_gives_up_after_bound():
    with pytest.raises(K.EnvelopeError):
        K._sample_radius(2, 1.0, 1.0, 1.0, K.green_norm(ball(2)), _AlwaysReject())


@pytest.mark.parametrize("dim", [2, 3])
def test_sphere_sampler_norm_and_spread(dim):
    rng = PhiloxStream(seed=21, stream_id=dim)
    pts = np.array([K.sample_sphere_uniform(dim, 2.5, rng) for _ in range(4000)])
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 2.5, rtol=1e-12)
    # componentwise means vanish and the z component is uniform in 3D
    assert np.max(np.abs(pts.mean(axis=0))) < 0.1
    if dim == 3:
        z = pts[:, 2] / 2.5
        hist, _ = np.histogram(z, bins=10, range=(-1.0, 1.0))
        assert np.max(np.abs(hist - 400)) / math.sqrt(4000) < 4.0


def test_sphere_sampler_domain():
    with pytest.raises(ValueError):
        K.sample_sphere_uniform(2, 0.0, PhiloxStream(1, 1))
