"""Random-wave synthesis of isotropic Gaussian fields.

A realization is the finite cosine sum

    Phi(x) = sqrt(2 s_m / N) * sum_j cos(<xi_j, x> + phi_j)

with wave vectors drawn from the normalized spectral measure and uniform
phases.  Its covariance is exactly the kernel ``K_a`` for every ``N``; it is
Gaussian only in the limit, which is why ``N`` defaults to a few thousand.
Jets are computed by differentiating the sum, never by finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .amplitude import Amplitude
from .spectral import spectral_moments

DEFAULT_WAVES = 4096
CDF_NODES = 4096
TAIL_MASS = 1e-12
# rows of evaluation points handled per block in the batched jets
_BLOCK = 512


@dataclass(frozen=True)
class Jet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class FieldRealization:
    wave_vectors: np.ndarray
    phases: np.ndarray
    scale: float

    @property
    def dim(self) -> int:
        return self.wave_vectors.shape[1]

    @property
    def n_waves(self) -> int:
        return self.wave_vectors.shape[0]

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.scale * np.cos(X @ self.wave_vectors.T + self.phases).sum(axis=1)

    def gradients(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        for sl in _blocks(len(X)):
            s = np.sin(X[sl] @ self.wave_vectors.T + self.phases)
            out[sl] = -self.scale * (s @ self.wave_vectors)
        return out

    def grid_gradients(self, axes) -> np.ndarray:
        """Gradients on the tensor grid ``axes[0] x ... x axes[m-1]``, shape ``(n_1, ..., n_m, m)``.

        In two dimensions the phase factorizes over the axes, so the whole
        grid costs two complex matrix products instead of one sine per node
        and wave.
        """
        axes = [np.asarray(a, dtype=float) for a in axes]
        m = self.dim
        if len(axes) != m:
            raise ValueError("need one axis per dimension")
        if m != 2:
            mesh = np.meshgrid(*axes, indexing="ij")
            X = np.stack([g.ravel() for g in mesh], axis=1)
            return self.gradients(X).reshape(*(len(a) for a in axes), m)
        xi = self.wave_vectors
        E1 = np.exp(1j * (np.outer(axes[0], xi[:, 0]) + self.phases))
        E2 = np.exp(1j * np.outer(axes[1], xi[:, 1]))
        out = np.empty((len(axes[0]), len(axes[1]), 2))
        for j in range(2):
            out[..., j] = -self.scale * ((E1 * xi[:, j]) @ E2.T).imag
        return out

    def jets(self, X):
        """Values ``(P,)``, gradients ``(P, m)`` and Hessians ``(P, m, m)`` at the rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        P, m = X.shape
        xi = self.wave_vectors
        val = np.empty(P)
        grad = np.empty((P, m))
        hess = np.empty((P, m, m))
        pairs = [(i, j) for i in range(m) for j in range(i, m)]
        prods = {(i, j): xi[:, i] * xi[:, j] for i, j in pairs}
        for sl in _blocks(P):
            A = X[sl] @ xi.T + self.phases
            c, s = np.cos(A), np.sin(A)
            val[sl] = self.scale * c.sum(axis=1)
            grad[sl] = -self.scale * (s @ xi)
            for i, j in pairs:
                hess[sl, i, j] = hess[sl, j, i] = -self.scale * (c @ prods[i, j])
        return val, grad, hess

    def third_directional(self, X, V) -> np.ndarray:
        """``D^3 Phi(x)[v, v, v]`` for paired rows x of X and v of V."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        out = np.empty(len(X))
        for sl in _blocks(len(X)):
            s = np.sin(X[sl] @ self.wave_vectors.T + self.phases)
            out[sl] = self.scale * np.sum(s * (V[sl] @ self.wave_vectors.T) ** 3, axis=1)
        return out


def _blocks(n):
    return [slice(k, min(k + _BLOCK, n)) for k in range(0, n, _BLOCK)]


def evaluate_jet(f: FieldRealization, x) -> Jet:
    val, grad, hess = f.jets(np.asarray(x, dtype=float).reshape(1, -1))
    return Jet(float(val[0]), grad[0], hess[0])


class RadialSampler:
    """Inverse-CDF sampler for the radial density proportional to ``r^(m-1) a(r)^2``."""

    def __init__(self, a: Amplitude, m: int, nodes: int = CDF_NODES):
        self.a, self.m = a, m
        r_tail = self._tail_radius(a, m)
        r = np.linspace(0.0, r_tail, nodes)
        F = _cumulative(lambda t: t ** (m - 1) * a.squared(t), r)
        F /= F[-1]
        # drop ties from the flat top so the inverse stays a function
        keep = np.concatenate([[True], np.diff(F) > 0])
        self.r_tail = r_tail
        self.inverse = PchipInterpolator(F[keep], r[keep])

    @staticmethod
    def _tail_radius(a, m):
        r_cut = a.cutoff(m)
        r = np.linspace(0.0, r_cut, 2 * CDF_NODES)
        F = _cumulative(lambda t: t ** (m - 1) * a.squared(t), r)
        return float(r[np.argmax(F / F[-1] > 1 - TAIL_MASS)])

    def __call__(self, u):
        return self.inverse(u)


def _cumulative(func, r):
    """Exact-to-rounding cumulative integral of a smooth ``func`` on the nodes ``r``."""
    x, w = np.polynomial.legendre.leggauss(8)
    lo, hi = r[:-1, None], r[1:, None]
    pts = (lo + hi) / 2 + (hi - lo) / 2 * x
    pieces = (func(pts) * w).sum(axis=1) * (hi - lo)[:, 0] / 2
    return np.concatenate([[0.0], np.cumsum(pieces)])


@lru_cache(maxsize=None)
def radial_sampler(a: Amplitude, m: int) -> RadialSampler:
    return RadialSampler(a, m)


def sample_field(a: Amplitude, m: int, n_waves: int = DEFAULT_WAVES,
                 rng: np.random.Generator | None = None) -> FieldRealization:
    if n_waves < 1:
        raise ValueError("n_waves must be >= 1")
    if rng is None:
        raise ValueError("an explicit random stream is required")
    radial = radial_sampler(a, m)(rng.uniform(size=n_waves))
    direction = rng.standard_normal((n_waves, m))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    phases = rng.uniform(0.0, 2 * math.pi, size=n_waves)
    s = spectral_moments(a, m).s
    xi = radial[:, None] * direction
    xi.setflags(write=False)
    phases.setflags(write=False)
    return FieldRealization(xi, phases, math.sqrt(2 * s / n_waves))


def deterministic_field(wave_vectors, phases, scale: float = 1.0) -> FieldRealization:
    """Field from explicit waves, e.g. ``cos x1 + cos x2``; used for calculus checks."""
    xi = np.atleast_2d(np.asarray(wave_vectors, dtype=float))
    ph = np.asarray(phases, dtype=float).reshape(len(xi))
    return FieldRealization(xi, ph, float(scale))
