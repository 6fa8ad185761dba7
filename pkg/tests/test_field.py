import math

import numpy as np
import pytest

import oracles
from isocrit import Amplitude, rng
from isocrit.field import (deterministic_field, evaluate_jet, radial_sampler, sample_field)
from isocrit.spectral import kernel_values, radial_moment, spectral_moments

GAUSS = Amplitude()


def test_single_wave_calculus():
    f = deterministic_field([[1.0, 0.0]], [math.pi / 2], scale=2.0)
    jet = evaluate_jet(f, [0.0, 0.0])
    # 2 cos(x1 + pi/2) = -2 sin(x1)
    assert jet.value == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(jet.gradient, [-2.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(jet.hessian, np.zeros((2, 2)), atol=1e-15)


def test_jets_match_finite_differences():
    f = sample_field(GAUSS, 2, 256, rng.stream(1))
    X = rng.stream(2).uniform(-5, 5, size=(100, 2))
    _, grads, hess = f.jets(X)
    for x, g, H in zip(X, grads, hess):
        fd = oracles.central_gradient(lambda y: f.values(y)[0], x)
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * np.abs(g).max())
        fdH = oracles.jacobian_fd(lambda y: f.gradients(y)[0], x)
        assert np.allclose(H, fdH, rtol=1e-5, atol=1e-5 * np.abs(H).max())
        np.testing.assert_array_equal(H, H.T)


def test_values_gradients_and_jets_consistent():
    f = sample_field(GAUSS, 3, 300, rng.stream(3))
    X = rng.stream(4).uniform(-2, 2, size=(1100, 3))  # spans several blocks
    val, grad, _ = f.jets(X)
    np.testing.assert_allclose(val, f.values(X), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(grad, f.gradients(X), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_grid_gradients_match_pointwise(m):
    f = sample_field(GAUSS, m, 200, rng.stream(5, m))
    axes = [np.linspace(-1, 2, 7), np.linspace(0, 1, 5), np.linspace(3, 4, 4)][:m]
    G = f.grid_gradients(axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in mesh], axis=1)
    np.testing.assert_allclose(G.reshape(-1, m), f.gradients(X), atol=1e-13)
    with pytest.raises(ValueError):
        f.grid_gradients(axes[:-1] if m > 1 else axes * 2)


def test_third_directional_matches_finite_differences():
    f = sample_field(GAUSS, 2, 200, rng.stream(6))
    x = np.array([0.3, -1.1])
    v = np.array([0.6, 0.8])
    eps = 1e-4
    _, _, Hp = f.jets(np.array([x + eps * v, x - eps * v]))
    fd = v @ (Hp[0] - Hp[1]) @ v / (2 * eps)
    assert f.third_directional(x, v)[0] == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("a", [GAUSS, Amplitude("poly-gaussian", (0.4,))], ids=str)
@pytest.mark.parametrize("m", [1, 2, 3])
def test_radial_sampler_moments(a, m):
    # E r^2 under the density r^(m-1) a^2 / I_{m-1}
    r = radial_sampler(a, m)(rng.stream(7, m).uniform(size=200_000))
    expected = radial_moment(a, m + 1) / radial_moment(a, m - 1)
    se = (r ** 2).std() / math.sqrt(len(r))
    assert abs((r ** 2).mean() - expected) < 4 * se
    assert r.min() >= 0


def test_radial_sampler_is_monotone():
    s = radial_sampler(GAUSS, 2)
    u = np.linspace(0, 1, 10_001)
    assert np.all(np.diff(s(u)) >= 0)
    assert s(1.0) == pytest.approx(s.r_tail)


def test_sample_field_contract():
    with pytest.raises(ValueError):
        sample_field(GAUSS, 2, 0, rng.stream(0))
    with pytest.raises(ValueError):
        sample_field(GAUSS, 2, 10)
    f = sample_field(GAUSS, 2, 64, rng.stream(0, 3))
    g = sample_field(GAUSS, 2, 64, rng.stream(0, 3))
    np.testing.assert_array_equal(f.wave_vectors, g.wave_vectors)
    np.testing.assert_array_equal(f.phases, g.phases)
    assert f.scale == pytest.approx(math.sqrt(2 * spectral_moments(GAUSS, 2).s / 64))
    assert f.n_waves == 64 and f.dim == 2
    assert not f.wave_vectors.flags.writeable


def _ensemble(m, n, waves, seed):
    fields = [sample_field(GAUSS, m, waves, rng.stream(seed, k)) for k in range(n)]
    return fields


def _within(samples, expected, k):
    mean = samples.mean()
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    return abs(mean - expected) < k * se


def test_empirical_one_point_moments():
    m, n = 2, 10_000
    mom = spectral_moments(GAUSS, m)
    vals, grads, hess = [], [], []
    for f in _ensemble(m, n, 64, 20):
        v, g, H = f.jets(np.zeros((1, m)))
        vals.append(v[0])
        grads.append(g[0])
        hess.append(H[0])
    vals, grads, hess = np.array(vals), np.array(grads), np.array(hess)
    assert _within(vals, 0.0, 3)
    assert _within(vals ** 2, mom.s, 3)
    assert _within(grads[:, 0] ** 2, mom.d, 3)
    # Hessian pattern (3h, h, h) and gradient-Hessian independence
    assert _within(hess[:, 0, 0] ** 2, 3 * mom.h, 5)
    assert _within(hess[:, 0, 0] * hess[:, 1, 1], mom.h, 5)
    assert _within(hess[:, 0, 1] ** 2, mom.h, 5)
    for i in range(m):
        for j, k in [(0, 0), (0, 1), (1, 1)]:
            assert _within(grads[:, i] * hess[:, j, k], 0.0, 5)


def test_empirical_covariance_matches_kernel():
    m, n = 2, 20_000
    zs = [0.5, 1.0, 2.0]
    pts = np.array([[0.0, 0.0]] + [[z, 0.0] for z in zs])
    rows = np.array([f.values(pts) for f in _ensemble(m, n, 32, 21)])
    K = kernel_values(GAUSS, m, zs)
    for k, z in enumerate(zs):
        assert _within(rows[:, 0] * rows[:, k + 1], K[k], 5)
