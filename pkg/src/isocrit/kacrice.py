"""Kac-Rice densities and the constants ``C_m``, ``Z_m`` and ``V_m``.

One point: the expected number of critical points per unit volume is

    C_m(a) = (h_m / (pi d_m))^(m/2) * E|det X|,    X ~ S_m^(1/2).

Two points: for the field ``Phi(x) + Phi(y)`` on ``R^m x R^m`` the Kac-Rice
density ``rho_hat(x, y)`` depends only on ``r = |x - y|``; for two independent
copies it is the constant ``rho_tilde = C_m^2``.  The difference
``Delta(r) = rho_hat(r) - rho_tilde`` decays faster than any power of ``r``
and its integral gives the variance constant

    Z_m(a) = |S^(m-1)| * int_0^inf r^(m-1) Delta(r) dr,   V_m(a) = Z_m(a) + C_m(a).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import ensembles, gaussian, rng as rngmod
from .amplitude import Amplitude
from .spectral import (_sphere_area, decay_envelope, grad_cross_cov, kernel_tables,
                       spectral_moments)


class PrecisionError(RuntimeError):
    """A reported error bound exceeds the requested tolerance."""

    def __init__(self, message, bound):
        super().__init__(f"{message}: {bound:.3e}")
        self.bound = bound


@dataclass(frozen=True)
class OnePointDensity:
    c_m: float
    stderr: float
    d_m: float
    h_m: float
    abs_det: float
    abs_det_se: float


def one_point_constant(a: Amplitude, m: int, n_mc: int = 10 ** 6, seed=0,
                       workers: int | None = None) -> OnePointDensity:
    mom = spectral_moments(a, m)
    e, se = ensembles.expected_abs_det(m, 0.5, n_mc, seed, workers)
    factor = (mom.h / (math.pi * mom.d)) ** (m / 2)
    return OnePointDensity(factor * e, factor * se, mom.d, mom.h, e, se)


@lru_cache(maxsize=None)
def reference_constant(a: Amplitude, m: int) -> OnePointDensity:
    """A fixed-seed, 10^6-sample ``C_m`` shared by the census defaults and the harness."""
    return one_point_constant(a, m, 10 ** 6, seed=0)


# ---------------------------------------------------------------------------
# two-point covariance


def grad_pair_covariance(a: Amplitude, m: int, r: float, check: bool = True) -> np.ndarray:
    """Covariance of ``(grad Phi(x), grad Phi(y))`` with ``|x - y| = r``.

    Equal to ``[[d I, D], [D, d I]]`` with ``D = diag(d_m(j)(r))``; pairing
    coordinate ``j`` of both points gives the 2x2 blocks
    ``[[d_m, d_m(j)], [d_m(j), d_m]]``.  ``check=False`` skips the
    nondegeneracy test (needed to look at ``r = 0``).
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    d = spectral_moments(a, m).d
    D = np.diag(grad_cross_cov(a, m, r))
    cov = np.block([[d * np.eye(m), D], [D, d * np.eye(m)]])
    if check and not gaussian.is_nondegenerate(cov):
        raise gaussian.DegenerateCovarianceError(
            f"gradient pair covariance at r={r:g} is degenerate", float(np.linalg.eigvalsh(cov)[0]))
    return cov


def _unit(m, i):
    g = [0] * m
    g[i] += 1
    return g


def _variables(m):
    """Multi-indices of (omega(H), grad) at one point, with omega weights."""
    out = []
    for i, j in ensembles.omega_index(m):
        g = _unit(m, i)
        g[j] += 1
        out.append((tuple(g), 1.0 if i == j else ensembles.SQRT2))
    for i in range(m):
        out.append((tuple(_unit(m, i)), 1.0))
    return out


def _assemble(m, at_zero, at_r, direction):
    """Joint covariance of (omega H(x), omega H(y), grad(x), grad(y)), ``x - y = direction * r e_1``."""
    var = _variables(m)
    k = ensembles.omega_dim(m)
    hess, grad = var[:k], var[k:]
    order = [(v, 0) for v in hess] + [(v, 1) for v in hess] + [(v, 0) for v in grad] + [(v, 1) for v in grad]
    n = len(order)
    S = np.empty((n, n))
    for p, ((al, wa), P) in enumerate(order):
        for q, ((be, wb), Q) in enumerate(order):
            gam = tuple(x + y for x, y in zip(al, be))
            sign = (-1) ** sum(be)
            if P == Q:
                val = at_zero[gam]
            else:
                # z = x - y for P = x; the kernel derivative of order |gam| is odd/even in z
                flip = direction if P == 0 else -direction
                val = at_r[gam] * (flip ** sum(gam))
            S[p, q] = wa * wb * sign * val
    return (S + S.T) / 2


def joint_covariance(a: Amplitude, m: int, r: float, direction: int = 1) -> np.ndarray:
    t0, tr = kernel_tables(a, m, [0.0, r])
    return _assemble(m, t0.entries, tr.entries, direction)


def _conditioned(S, m):
    k = ensembles.omega_dim(m)
    Y, X = slice(0, 2 * k), slice(2 * k, None)
    reg = gaussian.condition(S[Y, Y], S[X, X], S[Y, X])
    return reg.cov_conditioned, gaussian.density_at_zero(S[X, X])


def conditioned_hessians(a: Amplitude, m: int, r: float, direction: int = 1):
    """``(Var[(omega H_x, omega H_y) | grad = 0], p_grad(0))`` at separation r."""
    return _conditioned(joint_covariance(a, m, r, direction), m)


def two_point_density_hat(a: Amplitude, m: int, r: float, n_mc: int, rng: np.random.Generator,
                          direction: int = 1):
    """Plain Monte Carlo ``rho_hat(r)`` with its standard error."""
    if r <= 0:
        raise ValueError("r must be positive")
    cov, p0 = conditioned_hessians(a, m, r, direction)
    e, se = ensembles.expected_abs_det_pair(cov, n_mc, rng)
    return e * p0, se * p0


def two_point_density_tilde(a: Amplitude, m: int, n_mc: int = 10 ** 6, seed=0, workers=None):
    """``rho_tilde = C_m^2`` with the propagated standard error."""
    one = one_point_constant(a, m, n_mc, seed, workers)
    return one.c_m ** 2, 2 * one.c_m * one.stderr


def _infinity_covariance(a, m):
    """Conditioned Hessian covariance at infinite separation: two independent ``S_m^h`` blocks."""
    mom = spectral_moments(a, m)
    block = ensembles.SymmetricEnsemble(m, mom.h).omega_covariance()
    z = np.zeros_like(block)
    return np.block([[block, z], [z, block]]), (2 * math.pi * mom.d) ** (-m)


# ---------------------------------------------------------------------------
# radial profile and Z_m


@dataclass(frozen=True)
class TwoPointProfile:
    """``rho_hat``, ``rho_tilde`` and ``Delta`` on a set of separations.

    ``rho_hat`` is the control-variate estimate ``rho_tilde + delta``, where
    ``delta`` averages the paired differences against infinite separation
    drawn from the same normals; ``rho_hat - rho_tilde == delta`` exactly.
    """
    r: np.ndarray
    rho_hat: np.ndarray
    rho_hat_se: np.ndarray
    rho_tilde: float
    rho_tilde_se: float
    delta: np.ndarray
    delta_se: np.ndarray
    T: np.ndarray
    samples: np.ndarray = field(repr=False, default=None)


R_MIN_REL_TOL = 1e-4


def default_r_min(a: Amplitude, m: int, rel_tol: float = R_MIN_REL_TOL) -> float:
    """Smallest separation (to 0.1%) where the gradient pair passes ``is_nondegenerate(rel_tol)``.

    The tolerance is looser than the package-wide 1e-10: the regression loses
    about ``eps / rel_tol`` relative accuracy, and at 1e-10 the conditioned
    Hessian covariance is no longer numerically PSD.
    """
    def ok(r):
        return gaussian.is_nondegenerate(grad_pair_covariance(a, m, r, check=False), rel_tol)

    lo, hi = 0.0, 1.0 / a.length_scale
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while lo == 0.0 or hi / lo > 1.001:
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2
        if lo == 0.0 and not ok(mid):
            lo = mid
        elif lo == 0.0:
            hi = mid
        elif ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def two_point_profile(a: Amplitude, m: int, rs, n_mc: int, seed=0, rho_tilde=None,
                      workers: int | None = None, keep_samples: bool = False) -> TwoPointProfile:
    """Delta(r) on the separations ``rs`` with common random numbers.

    One block of standard normals is pushed through the conditioned
    covariance at every r and at infinite separation; Delta(r) is the mean
    of the paired difference.  ``rho_tilde`` defaults to
    :func:`two_point_density_tilde` with the same seed.
    """
    rs = np.asarray(rs, dtype=float)
    if np.any(rs <= 0):
        raise ValueError("separations must be positive")
    if n_mc < 2:
        raise ValueError("n_mc >= 2 required")
    if rho_tilde is None:
        rho_tilde = two_point_density_tilde(a, m, seed=seed)
    rt, rt_se = rho_tilde
    k = ensembles.omega_dim(m)
    normals = rngmod.stream(seed, 1).standard_normal((n_mc, 2 * k))
    inf_cov, inf_p = _infinity_covariance(a, m)
    base = inf_p * _abs_det_pair(normals @ gaussian.sqrt_psd(inf_cov), m)
    tables = kernel_tables(a, m, np.concatenate([[0.0], rs]))
    at_zero = tables[0].entries

    def node(i):
        cov, p0 = _conditioned(_assemble(m, at_zero, tables[i + 1].entries, 1), m)
        return p0 * _abs_det_pair(normals @ gaussian.sqrt_psd(cov), m) - base

    nw = rngmod.worker_count(workers)
    if nw == 1:
        diffs = [node(i) for i in range(len(rs))]
    else:
        with ThreadPoolExecutor(nw) as pool:
            diffs = list(pool.map(node, range(len(rs))))
    diffs = np.array(diffs).reshape(len(rs), n_mc)
    delta = diffs.mean(axis=1)
    delta_se = diffs.std(axis=1, ddof=1) / math.sqrt(n_mc)
    T = np.array([t.decay for t in tables[1:]])
    return TwoPointProfile(rs, rt + delta, np.hypot(delta_se, rt_se), rt, rt_se,
                           delta, delta_se, T, diffs if keep_samples else None)


def _abs_det_pair(w, m):
    k = ensembles.omega_dim(m)
    return (ensembles.abs_det(ensembles.from_omega(w[:, :k], m))
            * ensembles.abs_det(ensembles.from_omega(w[:, k:], m)))


@dataclass(frozen=True)
class QuadOptions:
    """Quadrature settings for :func:`z_constant`.

    ``r_min=None`` picks :func:`default_r_min`.  ``nodes`` must be odd
    (composite Simpson in ``log r``).  Each of the diagonal and tail error
    bounds must stay below ``tol``.
    """
    r_min: float | None = None
    r_max: float = 10.0
    nodes: int = 65
    tol: float = 1e-3

    def __post_init__(self):
        if self.nodes < 5 or self.nodes % 2 == 0:
            raise ValueError("nodes must be odd and >= 5")
        if self.r_min is not None and not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")


@dataclass(frozen=True)
class VarianceConstants:
    m: int
    c_m: float
    c_m_se: float
    z_m: float
    z_m_err: float
    z_m_se: float
    diagonal_err: float
    tail_err: float
    quad_err: float
    r_min: float
    r_max: float
    nodes: int
    profile: TwoPointProfile = field(repr=False)

    @property
    def v_m(self) -> float:
        return self.z_m + self.c_m

    @property
    def v_m_err(self) -> float:
        return self.z_m_err + self.c_m_se


def _simpson_weights(n, du):
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * du / 3


def z_constant(a: Amplitude, m: int, quad: QuadOptions | None = None, n_mc: int = 2 * 10 ** 5,
               seed=0, workers: int | None = None, one_point: OnePointDensity | None = None
               ) -> VarianceConstants:
    """``Z_m`` by Simpson's rule in ``log r`` over ``[r_min, r_max]`` plus bounded end pieces.

    * ``[0, r_min]``: the constant ``-rho_tilde`` part integrates exactly;
      the ``rho_hat`` part is bounded by extrapolating ``r^(m-1) rho_hat``
      linearly to 0 and is reported as ``diagonal_err``, not added.
    * ``[r_max, inf)``: ``|Delta| <= K sqrt(T)`` with ``K`` fitted on the
      nodes with ``r >= 1``, integrated against ``r^(m-1)`` as ``tail_err``.
    * ``quad_err`` is the Richardson estimate from the half-resolution rule.

    ``z_m_err`` is the sum of the Monte Carlo standard error and the three
    deterministic error terms.
    """
    quad = quad or QuadOptions()
    r_min = quad.r_min if quad.r_min is not None else default_r_min(a, m)
    if not r_min < quad.r_max:
        raise ValueError(f"r_min={r_min:g} must be below r_max={quad.r_max:g}")
    one = one_point or one_point_constant(a, m, seed=seed, workers=workers)
    rho_tilde = (one.c_m ** 2, 2 * one.c_m * one.stderr)
    u = np.linspace(math.log(r_min), math.log(quad.r_max), quad.nodes)
    rs = np.exp(u)
    prof = two_point_profile(a, m, rs, n_mc, seed, rho_tilde, workers, keep_samples=True)

    # integrand in u = log r is r^m Delta(r); per-sample so the MC error is exact
    w = _simpson_weights(quad.nodes, u[1] - u[0]) * rs ** m
    per_sample = w @ prof.samples
    w_half = _simpson_weights(quad.nodes // 2 + 1, 2 * (u[1] - u[0])) * rs[::2] ** m
    integral = float(per_sample.mean())
    half = float(w_half @ prof.delta[::2])
    mc_se = float(per_sample.std(ddof=1) / math.sqrt(len(per_sample)))
    quad_err = abs(integral - half) / 15

    area = _sphere_area(m)
    head = -rho_tilde[0] * r_min ** m / m
    diag = area * r_min ** m * max(prof.rho_hat[0], 0.0) / 2
    mask = rs >= 1.0 / a.length_scale
    K_env = float(np.max(np.abs(prof.delta[mask]) / np.sqrt(prof.T[mask])))
    tail_r = np.linspace(quad.r_max, quad.r_max + 40.0 / a.length_scale, 4001)
    tail = area * K_env * integrate.trapezoid(
        tail_r ** (m - 1) * np.sqrt(decay_envelope(a, m, tail_r)), tail_r)
    for bound, label in ((diag, "diagonal error bound"), (tail, "tail error bound")):
        if bound > quad.tol:
            raise PrecisionError(f"{label} exceeds tol={quad.tol:g}", bound)

    z = area * (integral + head)
    z_se = area * math.hypot(mc_se, rho_tilde[1] * r_min ** m / m)
    z_err = z_se + diag + tail + area * quad_err
    return VarianceConstants(m, one.c_m, one.stderr, z, z_err, z_se, diag, tail, area * quad_err,
                             r_min, quad.r_max, quad.nodes, prof)
