"""Centered Gaussian vectors: regression, densities, sampling, expectations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_REL_TOL = 1e-10


class DegenerateCovarianceError(ValueError):
    """Raised when a covariance that must be invertible is (numerically) singular."""

    def __init__(self, message, min_eig):
        super().__init__(f"{message} (min eigenvalue {min_eig:.3e})")
        self.min_eig = min_eig


def _symmetric(cov, name="cov"):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    scale = max(np.max(np.abs(cov)), 1e-300)
    if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    return (cov + cov.T) / 2


@dataclass(frozen=True)
class CenteredGaussian:
    """Law of a centered Gaussian vector, given by its covariance."""
    cov: np.ndarray

    def __post_init__(self):
        cov = _symmetric(self.cov)
        tr = np.trace(cov)
        if len(cov) and np.linalg.eigvalsh(cov)[0] < -1e-10 * max(tr, 0.0):
            raise ValueError("covariance is not positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


@dataclass(frozen=True)
class RegressionResult:
    """Covariance of ``Y - E[Y | X]``."""
    cov_conditioned: np.ndarray


def is_nondegenerate(g, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    """True iff the smallest eigenvalue exceeds ``rel_tol * trace / dim``."""
    cov = g.cov if isinstance(g, CenteredGaussian) else _symmetric(g)
    n = cov.shape[0]
    lam = np.linalg.eigvalsh(cov)
    return bool(lam[0] > rel_tol * np.trace(cov) / n)


def _require_nondegenerate(cov, what):
    if not is_nondegenerate(cov):
        raise DegenerateCovarianceError(f"{what} is degenerate", float(np.linalg.eigvalsh(cov)[0]))


def condition(varY, varX, covYX) -> RegressionResult:
    """Regression formula ``Var[Y] - Cov[Y,X] Var[X]^-1 Cov[X,Y]``.

    The solve goes through a Cholesky factor of ``Var[X]``, so the output is
    symmetric by construction.
    """
    varY = _symmetric(varY, "varY")
    varX = _symmetric(varX, "varX")
    covYX = np.asarray(covYX, dtype=float).reshape(varY.shape[0], varX.shape[0])
    _require_nondegenerate(varX, "Var[X]")
    L = np.linalg.cholesky(varX)
    W = np.linalg.solve(L, covYX.T)
    return RegressionResult(varY - W.T @ W)


def density_at_zero(g) -> float:
    """Density of ``N(0, cov)`` at the origin."""
    cov = g.cov if isinstance(g, CenteredGaussian) else _symmetric(g)
    _require_nondegenerate(cov, "covariance")
    sign, logdet = np.linalg.slogdet(cov)
    n = cov.shape[0]
    return math.exp(-0.5 * (n * math.log(2 * math.pi) + logdet))


def sqrt_psd(cov) -> np.ndarray:
    """Symmetric square root with negative rounding-level eigenvalues clipped to 0.

    Eigenvalues below ``-1e-10 * trace`` mean the input is not PSD at all and
    raise ``ValueError``.
    """
    cov = _symmetric(cov)
    lam, U = np.linalg.eigh(cov)
    if len(lam) and lam[0] < -1e-10 * max(np.trace(cov), 1e-300):
        raise ValueError(f"matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    return (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.T


def sample(g, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws of shape ``(n, dim)``."""
    cov = g.cov if isinstance(g, CenteredGaussian) else _symmetric(g)
    S = sqrt_psd(cov)
    return rng.standard_normal((n, cov.shape[0])) @ S


def mean_and_stderr(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    n = len(values)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))


def gaussian_expectation(f, A, n: int = 0, rng: np.random.Generator | None = None,
                         normals=None) -> tuple[float, float]:
    """Monte Carlo estimate of ``E f(X)``, ``X ~ N(0, A)``, with its standard error.

    ``f`` maps an ``(n, dim)`` array of samples to ``n`` values.  Passing
    ``normals`` (standard normal rows) instead of ``rng`` pushes the same draws
    through ``A^(1/2)``, which is how common random numbers are shared between
    nearby covariances.
    """
    S = sqrt_psd(A)
    if normals is None:
        if rng is None or n < 2:
            raise ValueError("need either normals or (rng, n >= 2)")
        normals = rng.standard_normal((n, S.shape[0]))
    return mean_and_stderr(f(np.asarray(normals) @ S))


def paired_difference(f, A, B, normals) -> tuple[float, float]:
    """``E f(X_A) - E f(X_B)`` from one block of standard normals, with its standard error.

    Both laws are realized as ``normals @ cov^(1/2)``, so the difference is
    averaged sample by sample and its error reflects only the mismatch.
    """
    Z = np.asarray(normals, dtype=float)
    return mean_and_stderr(f(Z @ sqrt_psd(A)) - f(Z @ sqrt_psd(B)))
