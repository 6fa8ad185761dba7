"""The rotation-invariant Gaussian ensemble of symmetric matrices.

``S_m^v`` is the centered Gaussian law on symmetric ``m x m`` matrices with

    E[h_ij h_kl] = v (d_ij d_kl + d_ik d_jl + d_il d_jk).

Equivalently ``H = G + xi * I`` with ``G`` a GOE-type matrix (``Var g_ii = 2v``,
``Var g_ij = v``) and ``xi ~ N(0, v)`` independent of ``G``.

Matrices are flattened in the orthonormal "omega" coordinates: the pairs
``i <= j`` in lexicographic order, diagonal entries as they are and
off-diagonal entries multiplied by ``sqrt(2)``, so that the Frobenius inner
product becomes the Euclidean one.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gaussian, rng as rngmod

SQRT2 = math.sqrt(2.0)


@lru_cache(maxsize=None)
def omega_index(m: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(m) for j in range(i, m))


def omega_dim(m: int) -> int:
    return m * (m + 1) // 2


def to_omega(H) -> np.ndarray:
    """Flatten symmetric matrices (trailing two axes) to omega coordinates."""
    H = np.asarray(H, dtype=float)
    m = H.shape[-1]
    idx = omega_index(m)
    I = [i for i, _ in idx]
    J = [j for _, j in idx]
    w = np.where([i == j for i, j in idx], 1.0, SQRT2)
    return H[..., I, J] * w


def from_omega(w, m: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    H = np.empty(w.shape[:-1] + (m, m))
    for k, (i, j) in enumerate(omega_index(m)):
        val = w[..., k] if i == j else w[..., k] / SQRT2
        H[..., i, j] = val
        H[..., j, i] = val
    return H


@dataclass(frozen=True)
class SymmetricEnsemble:
    dim: int
    v: float = 0.5

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.v >= 0:
            raise ValueError("v must be nonnegative")

    def entry_covariance(self, i, j, k, l) -> float:
        d = lambda a, b: float(a == b)
        return self.v * (d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k))

    def omega_covariance(self) -> np.ndarray:
        """Covariance of the omega coordinates."""
        idx = omega_index(self.dim)
        n = len(idx)
        C = np.empty((n, n))
        for a, (i, j) in enumerate(idx):
            for b, (k, l) in enumerate(idx):
                wa = 1.0 if i == j else SQRT2
                wb = 1.0 if k == l else SQRT2
                C[a, b] = wa * wb * self.entry_covariance(i, j, k, l)
        return C


def sample_matrix(e: SymmetricEnsemble, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """One matrix (``n=None``) or a stack of ``n`` matrices from ``S_m^v``.

    Only the upper triangle is drawn, then mirrored, so samples are exactly
    symmetric.
    """
    m, sd = e.dim, math.sqrt(e.v)
    shape = (1 if n is None else n,)
    G = rng.standard_normal(shape + (m, m))
    G = np.triu(G, 1)
    G = G + np.swapaxes(G, -1, -2)
    diag = rng.standard_normal(shape + (m,)) * SQRT2
    xi = rng.standard_normal(shape)
    G[..., np.arange(m), np.arange(m)] = diag + xi[:, None]
    G *= sd
    return G[0] if n is None else G


def abs_det(H) -> np.ndarray:
    """``|det|`` over the trailing two axes, with closed forms for m <= 2."""
    H = np.asarray(H)
    m = H.shape[-1]
    if m == 1:
        return np.abs(H[..., 0, 0])
    if m == 2:
        return np.abs(H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0])
    return np.abs(np.linalg.det(H))


def _merge(parts):
    """Pool per-chunk (n, sum, sum of squares) into a mean and its stderr."""
    n = sum(p[0] for p in parts)
    s = math.fsum(p[1] for p in parts)
    ss = math.fsum(p[2] for p in parts)
    mean = s / n
    var = max(ss - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def _chunked(work, n, seed, workers):
    sizes = rngmod.chunk_sizes(n)
    jobs = [(k, size) for k, size in enumerate(sizes)]

    def run(job):
        k, size = job
        vals = work(rngmod.stream(seed, k), size)
        return size, math.fsum(vals), math.fsum(vals * vals)

    nw = rngmod.worker_count(workers)
    if nw == 1 or len(jobs) == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(nw) as pool:
            parts = list(pool.map(run, jobs))
    return _merge(parts)


def expected_abs_det(m: int, v: float, n: int, seed, workers: int | None = None):
    """Monte Carlo ``E|det H|`` for ``H ~ S_m^v``; returns ``(estimate, stderr)``.

    The ``n`` draws are split into fixed-size chunks, each with its own
    stream keyed by ``(seed, chunk)``, so the answer is the same for every
    worker count.
    """
    if n < 1000:
        raise ValueError("n >= 1000 required")
    e = SymmetricEnsemble(m, v)
    return _chunked(lambda g, size: abs_det(sample_matrix(e, g, size)), n, seed, workers)


def expected_abs_det_pair(joint_cov, n: int = 0, rng: np.random.Generator | None = None,
                          normals=None):
    """Monte Carlo ``E[|det H_x| |det H_y|]`` for stacked omega coordinates.

    ``joint_cov`` is the covariance of ``(omega(H_x), omega(H_y))``.  As in
    :func:`gaussian.gaussian_expectation`, ``normals`` may be passed to reuse
    the same standard-normal block across covariances.
    """
    joint_cov = np.asarray(joint_cov, dtype=float)
    k = joint_cov.shape[0] // 2
    m = int(round((math.sqrt(8 * k + 1) - 1) / 2))
    if 2 * omega_dim(m) != joint_cov.shape[0]:
        raise ValueError("joint_cov must have size 2 * m(m+1)/2")

    def f(w):
        return abs_det(from_omega(w[:, :k], m)) * abs_det(from_omega(w[:, k:], m))

    return gaussian.gaussian_expectation(f, joint_cov, n, rng, normals=normals)
