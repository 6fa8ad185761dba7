import math

import numpy as np
import pytest

import oracles
from isocrit import Amplitude, rng
from isocrit.gaussian import DegenerateCovarianceError, is_nondegenerate
from isocrit.kacrice import (PrecisionError, QuadOptions, conditioned_hessians, default_r_min,
                             grad_pair_covariance, joint_covariance, one_point_constant,
                             two_point_density_hat, two_point_density_tilde, two_point_profile,
                             z_constant)
from isocrit.spectral import decay_envelope, spectral_moments

GAUSS = Amplitude()
C1 = math.sqrt(3) / math.pi


def test_one_point_m1():
    one = one_point_constant(GAUSS, 1, 200_000, seed=1)
    assert abs(one.c_m - C1) < 3 * one.stderr
    assert oracles.one_point_m1(one.d_m, one.h_m) == pytest.approx(C1, rel=1e-12)


def test_one_point_m2_matches_quadrature_oracle():
    one = one_point_constant(GAUSS, 2, 200_000, seed=2)
    # h = d for the gaussian family, so the prefactor is 1/pi
    ref = oracles.abs_det_2x2_gauss_hermite(0.5) / math.pi
    assert abs(one.c_m - ref) < 3 * one.stderr


@pytest.mark.parametrize("m", [1, 2, 3])
def test_one_point_structure(m):
    a = Amplitude("poly-gaussian", (0.5,))
    one = one_point_constant(a, m, 20_000, seed=3)
    mom = spectral_moments(a, m)
    assert one.c_m == pytest.approx((mom.h / (math.pi * mom.d)) ** (m / 2) * one.abs_det, rel=1e-14)
    assert one.c_m > 0


def test_rho_tilde_is_c_squared():
    rt, se = two_point_density_tilde(GAUSS, 1, 100_000, seed=4)
    one = one_point_constant(GAUSS, 1, 100_000, seed=4)
    assert rt == one.c_m ** 2
    assert abs(rt - 3 / math.pi ** 2) < 3 * se


# --- gradient pair ------------------------------------------------------------------

@pytest.mark.parametrize("m", [1, 2, 3])
def test_grad_pair_far_is_diagonal(m):
    d = spectral_moments(GAUSS, m).d
    np.testing.assert_allclose(grad_pair_covariance(GAUSS, m, 20.0), d * np.eye(2 * m), atol=1e-10)


@pytest.mark.parametrize("a", [GAUSS, Amplitude("gaussian-scaled", (2.0,)), Amplitude("poly-gaussian", (0.3,))],
                         ids=str)
@pytest.mark.parametrize("m", [1, 2, 3])
def test_grad_pair_blocks_positive(a, m):
    d = spectral_moments(a, m).d
    for r in np.round(np.arange(0.1, 8.01, 0.1), 10):
        cov = grad_pair_covariance(a, m, r)
        for j in range(m):
            V = cov[np.ix_([j, m + j], [j, m + j])]
            assert V[0, 0] == d and np.linalg.det(V) > 0
        assert is_nondegenerate(cov)


def test_grad_pair_at_zero_singular():
    cov = grad_pair_covariance(GAUSS, 2, 0.0, check=False)
    for j in range(2):
        V = cov[np.ix_([j, 2 + j], [j, 2 + j])]
        assert abs(np.linalg.det(V)) < 1e-15
    with pytest.raises(DegenerateCovarianceError):
        grad_pair_covariance(GAUSS, 2, 0.0)
    with pytest.raises(ValueError):
        grad_pair_covariance(GAUSS, 2, -1.0)


def test_grad_pair_distance_to_far_limit_decays():
    d = spectral_moments(GAUSS, 2).d
    gaps = [np.linalg.norm(grad_pair_covariance(GAUSS, 2, r) - d * np.eye(4)) for r in range(2, 9)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


# --- joint covariance and conditioning ------------------------------------------------

@pytest.mark.parametrize("m", [1, 2])
def test_joint_covariance_against_sampled_fields(m):
    """The assembled covariance must be the covariance of jets of the field itself."""
    from isocrit.ensembles import to_omega
    from isocrit.field import sample_field
    r = 0.8
    S = joint_covariance(GAUSS, m, r)
    n = 4000
    rows = []
    x = np.zeros(m)
    x[0] = r
    pts = np.stack([x, np.zeros(m)])
    for k in range(n):
        f = sample_field(GAUSS, m, 64, rng.stream(30, k))
        _, g, H = f.jets(pts)
        rows.append(np.concatenate([to_omega(H[0]), to_omega(H[1]), g[0], g[1]]))
    rows = np.array(rows)
    emp = rows.T @ rows / n
    se = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S ** 2) / n)
    assert np.all(np.abs(emp - S) < 5 * se + 1e-12)


@pytest.mark.parametrize("m", [1, 2])
def test_conditioned_covariance_psd_on_nodes(m):
    rs = np.exp(np.linspace(math.log(default_r_min(GAUSS, m)), math.log(10), 65))
    for r in rs:
        cov, p0 = conditioned_hessians(GAUSS, m, r)
        lam = np.linalg.eigvalsh(cov)
        assert lam[0] > -1e-10 * np.trace(cov)
        assert p0 > 0


def test_m1_conditioned_matches_closed_form():
    for r in (0.3, 1.0, 2.0, 5.0):
        est, se = two_point_density_hat(GAUSS, 1, r, 200_000, rng.stream(5))
        assert abs(est - oracles.rho_hat_m1_gaussian(r)) < 3 * se


def test_rho_hat_direction_symmetry():
    cov_p, p_p = conditioned_hessians(GAUSS, 2, 1.3, direction=1)
    cov_m, p_m = conditioned_hessians(GAUSS, 2, 1.3, direction=-1)
    np.testing.assert_allclose(cov_p, cov_m, atol=1e-14)
    assert p_p == p_m
    a = two_point_density_hat(GAUSS, 2, 1.3, 5000, rng.stream(6), direction=1)
    b = two_point_density_hat(GAUSS, 2, 1.3, 5000, rng.stream(6), direction=-1)
    assert a[0] == pytest.approx(b[0], rel=1e-12)


def test_two_point_hat_rejects_zero():
    with pytest.raises(ValueError):
        two_point_density_hat(GAUSS, 1, 0.0, 100, rng.stream(0))


# --- profile ---------------------------------------------------------------------------

def test_profile_far_field_and_decay():
    prof = two_point_profile(GAUSS, 1, [1.0, 8.0, 12.0], 100_000, seed=7)
    # rho_hat is assembled as rho_tilde + delta, so only rounding separates them
    np.testing.assert_allclose(prof.rho_hat - prof.rho_tilde, prof.delta, rtol=0, atol=4e-16)
    assert abs(prof.delta[1]) <= 1e-4 * abs(prof.delta[0])
    for k in (1, 2):
        assert abs(prof.rho_hat[k] - prof.rho_tilde) <= max(0.01 * prof.rho_tilde, 3 * prof.rho_hat_se[k])
    assert np.all(prof.rho_hat >= 0) and prof.rho_tilde >= 0
    assert prof.samples is None


def test_profile_m2_decay():
    prof = two_point_profile(GAUSS, 2, [1.0, 8.0], 50_000, seed=8)
    assert abs(prof.delta[1]) <= 1e-4 * abs(prof.delta[0])


def test_profile_matches_m1_oracle():
    rs = [0.05, 0.5, 1.0, 2.0, 3.0]
    prof = two_point_profile(GAUSS, 1, rs, 200_000, seed=9)
    for r, d, se in zip(rs, prof.delta, prof.delta_se):
        exact = oracles.rho_hat_m1_gaussian(r) - prof.rho_tilde
        assert abs(d - exact) < 3 * se + 1e-12


def test_profile_worker_independent():
    a = two_point_profile(GAUSS, 2, [0.5, 1.0, 2.0], 3000, seed=10, workers=1)
    b = two_point_profile(GAUSS, 2, [0.5, 1.0, 2.0], 3000, seed=10, workers=3)
    np.testing.assert_array_equal(a.delta, b.delta)
    np.testing.assert_array_equal(a.rho_hat_se, b.rho_hat_se)


def test_profile_rejects():
    with pytest.raises(ValueError):
        two_point_profile(GAUSS, 1, [0.0, 1.0], 100, rho_tilde=(0.3, 0.0))
    with pytest.raises(ValueError):
        two_point_profile(GAUSS, 1, [1.0], 1, rho_tilde=(0.3, 0.0))


def test_decay_diagnostic_monotone_tail():
    prof = two_point_profile(GAUSS, 1, [2.0, 4.0, 8.0], 1000, seed=0, rho_tilde=(0.3, 0.0))
    np.testing.assert_allclose(prof.T, decay_envelope(GAUSS, 1, [2.0, 4.0, 8.0]), rtol=1e-7, atol=1e-15)
    assert prof.T[0] > prof.T[1] > prof.T[2]


def test_default_r_min_is_threshold():
    r = default_r_min(GAUSS, 2)
    assert is_nondegenerate(grad_pair_covariance(GAUSS, 2, r, check=False), 1e-4)
    assert not is_nondegenerate(grad_pair_covariance(GAUSS, 2, r / 1.01, check=False), 1e-4)


# --- Z_m ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def z1():
    return z_constant(GAUSS, 1, n_mc=100_000, seed=11)


def test_z_constant_m1_against_closed_form(z1):
    C, Z, _ = oracles.variance_constants_m1_gaussian()
    # z_m_se is one standard error; the other terms are deterministic bounds
    det = z1.diagonal_err + z1.tail_err + z1.quad_err
    assert abs(z1.z_m - Z) < 3 * z1.z_m_se + det
    assert abs(z1.v_m - (C + Z)) < 3 * math.hypot(z1.z_m_se, z1.c_m_se) + det
    assert z1.v_m - z1.z_m - z1.c_m == 0.0
    assert z1.v_m > 0


def test_z_constant_reports_bounds(z1):
    assert z1.diagonal_err < 1e-3 and z1.tail_err < 1e-3
    assert z1.z_m_err >= z1.z_m_se + z1.diagonal_err + z1.tail_err
    assert z1.nodes == 65 and z1.r_max == 10.0
    # integrand endpoint is negligible at r_max
    assert abs(z1.profile.delta[-1]) < 1e-6


def test_z_constant_node_doubling(z1):
    fine = z_constant(GAUSS, 1, QuadOptions(nodes=129), n_mc=100_000, seed=11)
    assert abs(fine.z_m - z1.z_m) < math.hypot(fine.z_m_err, z1.z_m_err)


def test_z_constant_precision_error():
    with pytest.raises(PrecisionError) as exc:
        z_constant(GAUSS, 1, QuadOptions(r_min=0.5, nodes=9), n_mc=1000, seed=0)
    assert exc.value.bound > 1e-3
    with pytest.raises(PrecisionError):
        z_constant(GAUSS, 1, QuadOptions(r_max=2.0, nodes=9), n_mc=1000, seed=0)


def test_quad_options_validation():
    with pytest.raises(ValueError):
        QuadOptions(nodes=64)
    with pytest.raises(ValueError):
        QuadOptions(nodes=3)
    with pytest.raises(ValueError):
        QuadOptions(r_min=5.0, r_max=2.0)
