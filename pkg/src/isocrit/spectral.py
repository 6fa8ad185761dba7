"""Spectral measure, its moments, and the covariance kernel with derivatives.

The spectral measure of the field with amplitude ``a`` on R^m is

    mu_a[dxi] = (2 pi)^-m a(|xi|)^2 dxi

and the covariance kernel is its characteristic function
``K(x) = int exp(i <xi, x>) mu_a[dxi]``.  Everything here is radial, so the
moment computations reduce to the one-dimensional integrals

    I_k(a) = int_0^inf r^k a(r)^2 dr

times angular moments of the unit sphere.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .amplitude import Amplitude

RADIAL_RTOL = 1e-10


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge; ``values`` holds the last two refinements."""

    def __init__(self, message, values):
        super().__init__(f"{message} (last refinements: {values[0]!r}, {values[1]!r})")
        self.values = values


class KernelConsistencyError(RuntimeError):
    pass


def radial_moment(a: Amplitude, k: int, method: str = "auto") -> float:
    """Return ``I_k(a) = int_0^inf r^k a(r)^2 dr``.

    ``method="auto"`` uses the family's closed form; ``method="quad"`` forces
    adaptive Gauss-Kronrod quadrature on ``[0, r_cut]``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if method == "auto":
        closed = a.closed_radial_moment(k)
        if closed is not None:
            return closed
    elif method != "quad":
        raise ValueError(f"unknown method {method!r}")
    r_cut = a.cutoff(max(k - 7, 1))
    return _adaptive(lambda r: r ** k * a.squared(r), r_cut, f"I_{k}")


def _adaptive(func, upper, label, limit=50, rounds=3):
    values = []
    for _ in range(rounds):
        res = integrate.quad(func, 0.0, upper, epsabs=0.0, epsrel=RADIAL_RTOL,
                             limit=limit, full_output=1)
        # a fourth element is the warning message
        if len(res) == 3:
            return res[0]
        values.append(res[0])
        limit *= 4
    raise QuadratureError(f"{label} did not converge", tuple(values[-2:]))


@dataclass(frozen=True)
class SpectralMoments:
    """Total mass ``s``, second moment ``d`` and mixed fourth moment ``h`` of mu_a."""
    dim: int
    s: float
    d: float
    h: float
    radial: tuple[float, ...] = field(repr=False)

    @property
    def pure_fourth(self) -> float:
        return 3.0 * self.h


def _sphere_area(m: int) -> float:
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


@lru_cache(maxsize=None)
def spectral_moments(a: Amplitude, m: int) -> SpectralMoments:
    if m < 1:
        raise ValueError("dimension must be >= 1")
    radial = tuple(radial_moment(a, k) for k in range(m + 8))
    norm = (2 * math.pi) ** (-m)
    s = norm * _sphere_area(m) * radial[m - 1]
    d = norm * math.pi ** (m / 2) / math.gamma(m / 2 + 1) * radial[m + 1]
    h = norm * math.pi ** (m / 2) / (2 * math.gamma(m / 2 + 2)) * radial[m + 3]
    return SpectralMoments(m, s, d, h, radial)


def angular_moment(m: int, kappa) -> float:
    """``int_{S^{m-1}} xi^(2 kappa) dvol = 2 prod Gamma(kappa_j + 1/2) / Gamma(|kappa| + m/2)``."""
    kappa = tuple(int(k) for k in kappa)
    if len(kappa) != m:
        raise ValueError(f"kappa must have {m} entries")
    if any(k < 0 for k in kappa):
        raise ValueError("kappa must be nonnegative")
    logs = sum(math.lgamma(k + 0.5) for k in kappa) - math.lgamma(sum(kappa) + m / 2)
    return 2.0 * math.exp(logs)


def spectral_moment_full(a: Amplitude, m: int, alpha) -> float:
    """``M_alpha = int xi^alpha mu_a[dxi]``; zero unless every exponent is even."""
    alpha = tuple(int(x) for x in alpha)
    if len(alpha) != m:
        raise ValueError(f"alpha must have {m} entries")
    if sum(alpha) > 8:
        raise ValueError("|alpha| <= 8 required")
    if any(x % 2 for x in alpha):
        return 0.0
    I = radial_moment(a, m - 1 + sum(alpha))
    return (2 * math.pi) ** (-m) * I * angular_moment(m, [x // 2 for x in alpha])


def multi_indices(m: int, max_order: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``m`` and total order ``<= max_order``, graded."""
    out = []
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(m), order):
            g = [0] * m
            for j in combo:
                g[j] += 1
            out.append(tuple(g))
    return out


# --------------------------------------------------------------------------
# kernel derivatives along the first axis


class _RadialTransform:
    """Oscillatory transforms ``int_R e^{itu} u^j g_p(u) du`` for one (a, m).

    ``g_p(u) = int_0^inf rho^(p+m-2) a(sqrt(u^2+rho^2))^2 drho`` collects the
    directions perpendicular to e_1 (``p`` is their total exponent).  The
    inner integrals are adaptive (vector-valued Gauss-Kronrod); the outer one
    is a composite Gauss-Legendre rule on ``[0, r_cut]``.
    """

    def __init__(self, a: Amplitude, m: int, panels: int = 160, order: int = 16):
        self.a, self.m = a, m
        r_cut = a.cutoff(m)
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, r_cut, panels + 1)
        half = np.diff(edges)[:, None] / 2
        mid = (edges[:-1] + edges[1:])[:, None] / 2
        self.u = (mid + half * x).ravel()
        self.w = (half * w).ravel()
        self.g = {}
        if m == 1:
            self.g[0] = a.squared(self.u)
        else:
            u2 = self.u ** 2
            for p in (0, 2, 4):
                def integrand(rho, p=p):
                    return rho ** (p + m - 2) * a.squared(np.sqrt(u2 + rho * rho))
                val, _ = integrate.quad_vec(integrand, 0.0, r_cut, epsabs=1e-300,
                                            epsrel=1e-12, limit=400)
                self.g[p] = val

    def half_line(self, j: int, p: int, ts) -> np.ndarray:
        """``int_0^inf trig(t u) u^j g_p(u) du`` with cos for even j, sin for odd j."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        trig = np.sin if j % 2 else np.cos
        weights = self.w * self.u ** j * self.g[p]
        return trig(np.outer(ts, self.u)) @ weights


@lru_cache(maxsize=None)
def _transform(a: Amplitude, m: int) -> _RadialTransform:
    tr = _RadialTransform(a, m)
    _check_consistency(a, m, tr)
    return tr


def _entries(a: Amplitude, m: int, ts, max_order: int = 4) -> dict:
    tr = _transform(a, m)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    norm = (2 * math.pi) ** (-m)
    cache = {}
    out = {}
    for gamma in multi_indices(m, max_order):
        perp = gamma[1:]
        if any(x % 2 for x in perp):
            out[gamma] = np.zeros(len(ts))
            continue
        j, p = gamma[0], sum(perp)
        if (j, p) not in cache:
            cache[j, p] = tr.half_line(j, p, ts)
        ang = angular_moment(m - 1, [x // 2 for x in perp]) if m > 1 else 1.0
        # i^|gamma| times the i picked up by the odd part of exp(itu)
        sign = (-1) ** ((sum(gamma) + (j % 2)) // 2)
        out[gamma] = sign * norm * ang * 2.0 * cache[j, p]
    return out


def _check_consistency(a, m, tr):
    mom = spectral_moments(a, m)
    ang0 = _sphere_area(m - 1) if m > 1 else 1.0
    norm = (2 * math.pi) ** (-m) * 2.0 * ang0
    k0 = norm * tr.half_line(0, 0, 0.0)[0]
    d0 = norm * tr.half_line(2, 0, 0.0)[0]
    for got, want, label in ((k0, mom.s, "K(0) vs s_m"), (d0, mom.d, "-d11K(0) vs d_m")):
        if abs(got - want) > 1e-8 * abs(want):
            raise KernelConsistencyError(f"{label}: {got!r} != {want!r}")


@dataclass(frozen=True)
class KernelTable:
    """Derivatives ``d^gamma K(t e_1)`` for every multi-index ``|gamma| <= 4``."""
    dim: int
    t: float
    entries: dict = field(repr=False)

    def __getitem__(self, gamma) -> float:
        return self.entries[tuple(gamma)]

    @property
    def decay(self) -> float:
        """``T(t e_1)``: the sum of ``|d^gamma K|`` over ``|gamma| <= 4``."""
        return float(sum(abs(v) for v in self.entries.values()))


def kernel_tables(a: Amplitude, m: int, ts) -> list[KernelTable]:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0):
        raise ValueError("separations must be nonnegative")
    ent = _entries(a, m, ts)
    return [KernelTable(m, float(t), {g: float(v[i]) for g, v in ent.items()})
            for i, t in enumerate(ts)]


def kernel_derivatives(a: Amplitude, m: int, t: float) -> KernelTable:
    return kernel_tables(a, m, [t])[0]


def kernel_values(a: Amplitude, m: int, ts) -> np.ndarray:
    """Radial profile ``K(t e_1)`` only."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    return _entries(a, m, ts, max_order=0)[(0,) * m]


def decay_envelope(a: Amplitude, m: int, ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    return sum(np.abs(v) for v in _entries(a, m, ts).values())


def grad_cross_cov(a: Amplitude, m: int, t: float) -> np.ndarray:
    """``d_m(j)(t) = int cos(t xi_1) xi_j^2 mu_a[dxi]`` for ``j = 1..m``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    ent = _entries(a, m, [t], max_order=2)
    out = np.empty(m)
    for j in range(m):
        g = [0] * m
        g[j] = 2
        out[j] = -ent[tuple(g)][0]
    return out


def jet_gramian(a: Amplitude, m: int, N: int) -> np.ndarray:
    """Gramian of the monomials ``xi^alpha, |alpha| <= N`` in ``L^2(mu_a)``.

    This is the covariance of the jet ``(d^alpha Phi(x))_{|alpha| <= N}`` up
    to the signs ``i^|alpha| (-i)^|beta|``, which do not affect definiteness.
    """
    if N > 3 or m > 4:
        raise ValueError("jet_gramian supports N <= 3 and m <= 4")
    idx = multi_indices(m, N)
    G = np.empty((len(idx), len(idx)))
    for i, al in enumerate(idx):
        for j, be in enumerate(idx[i:], start=i):
            G[i, j] = G[j, i] = spectral_moment_full(a, m, [x + y for x, y in zip(al, be)])
    return G
