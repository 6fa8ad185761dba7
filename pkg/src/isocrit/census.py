"""Locating and counting critical points of a field realization."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .field import FieldRealization

log = logging.getLogger(__name__)

# the audit grid is this many times finer than the seed grid
AUDIT_REFINE = 4


class DegenerateHessianError(ValueError):
    pass


class SupportError(ValueError):
    """The scaled test function reaches outside the census box."""


@dataclass(frozen=True)
class CensusOptions:
    """Settings for :func:`find_critical_points`.

    ``h`` is the seed-grid spacing; Newton steps are capped at
    ``step_cap * h`` so a seed cannot jump over its neighbours' basins.
    """
    h: float
    newton_tol: float
    dedup_radius: float
    max_iter: int = 60
    hess_tol: float = 1e-9
    step_cap: float = 0.5
    patience: int = 8
    audit: bool = True

    def __post_init__(self):
        if not (self.h > 0 and self.newton_tol > 0 and self.dedup_radius >= 0):
            raise ValueError("h and newton_tol must be positive, dedup_radius nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def refined(self, factor: float = 2.0) -> "CensusOptions":
        return replace(self, h=self.h / factor, dedup_radius=self.dedup_radius / factor)


def default_options(m: int, c_m: float, d_m: float, h_m: float) -> CensusOptions:
    """Spacing half the mean critical-point spacing, tolerances on the natural scales."""
    h = 0.5 * c_m ** (-1.0 / m)
    return CensusOptions(h=h, newton_tol=1e-10 * math.sqrt(d_m), dedup_radius=1e-6 * h,
                         hess_tol=1e-8 * math.sqrt(h_m))


@dataclass(frozen=True)
class CriticalPoint:
    location: np.ndarray
    value: float
    grad_norm: float
    morse_index: int
    min_abs_hess_eig: float


@dataclass(frozen=True)
class CriticalCensus:
    box: tuple[tuple[float, float], ...]
    points: tuple[CriticalPoint, ...]
    options: CensusOptions
    flagged: tuple[CriticalPoint, ...] = ()
    audit_added: int = 0

    @property
    def count(self) -> int:
        return len(self.points)

    def locations(self) -> np.ndarray:
        m = len(self.box)
        if not self.points:
            return np.empty((0, m))
        return np.array([p.location for p in self.points])


def morse_index(hessian, hess_tol: float = 0.0) -> int:
    lam = np.linalg.eigvalsh(np.asarray(hessian, dtype=float))
    if np.min(np.abs(lam)) <= hess_tol:
        raise DegenerateHessianError(f"Hessian eigenvalue within {hess_tol:g} of 0: {lam}")
    return int(np.sum(lam < 0))


def _as_box(box) -> tuple[tuple[float, float], ...]:
    out = tuple((float(lo), float(hi)) for lo, hi in box)
    if not out or any(not hi > lo for lo, hi in out):
        raise ValueError("box must be a nonempty product of intervals lo < hi")
    return out


def _grid(box, spacing, margin):
    axes = [np.arange(lo - margin, hi + margin + 1e-12 * spacing, spacing) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1), [len(a) for a in axes]


def _newton(f: FieldRealization, X, opts: CensusOptions, box):
    """Capped Newton iterations on the gradient from every row of X (in place).

    Returns the residual ``|grad|`` at each final position (``inf`` for seeds
    that were abandoned or ran out of iterations).

    A seed is abandoned once it leaves the box enlarged by ``4h`` or goes
    ``opts.patience`` iterations without a new best residual (capped Newton
    on a gradient field likes to settle into 2-cycles).
    """
    active = np.arange(len(X))
    cap = opts.step_cap * opts.h
    lo = np.array([b[0] for b in box]) - 4 * opts.h
    hi = np.array([b[1] for b in box]) + 4 * opts.h
    best = np.full(len(X), np.inf)
    stale = np.zeros(len(X), dtype=int)
    final = np.full(len(X), np.inf)
    for _ in range(opts.max_iter):
        if not len(active):
            break
        _, g, H = f.jets(X[active])
        resid = np.linalg.norm(g, axis=1)
        improved = resid < best[active]
        best[active] = np.minimum(best[active], resid)
        stale[active] = np.where(improved, 0, stale[active] + 1)
        lam, U = np.linalg.eigh(H)
        # eigen-solve so a near-singular Hessian yields a long (capped) step, not NaN
        lam = np.where(np.abs(lam) < 1e-300, 1e-300, lam)
        step = -np.einsum("pij,pj->pi", U, np.einsum("pji,pj->pi", U, g) / lam)
        length = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, cap / np.maximum(length, 1e-300))[:, None]
        move = (resid > opts.newton_tol) & (stale[active] < opts.patience)
        final[active[~move]] = resid[~move]
        X[active[move]] += step[move]
        active = active[move]
        inside = np.all((X[active] > lo) & (X[active] < hi), axis=1)
        active = active[inside]
    return final


def _audit_seeds(f: FieldRealization, box, h, known, refine: int = AUDIT_REFINE):
    """Secondary seeds from a grid of spacing ``h / refine``.

    In one dimension every sign change of the derivative brackets a zero,
    which is located by Brent's method.  Otherwise the seeds are the local
    minima of |grad|^2 that have no ``known`` point within one fine cell;
    close pairs that share a single minimum are left to the fold-partner
    seeds.
    """
    step = h / refine
    axes = [np.arange(lo - 2 * h, hi + 2 * h + 1e-12 * step, step) for lo, hi in box]
    G = f.grid_gradients(axes)
    if len(box) == 1:
        t, g = axes[0], G[:, 0]
        deriv = lambda x: float(f.gradients([[x]])[0, 0])
        roots = [brentq(deriv, t[i], t[i + 1], xtol=1e-14, rtol=1e-15)
                 for i in np.nonzero(g[:-1] * g[1:] < 0)[0]]
        return np.array(roots, dtype=float).reshape(-1, 1)
    q = (G ** 2).sum(axis=-1)
    idx = np.nonzero(q == minimum_filter(q, size=3, mode="nearest"))
    centres = np.stack([a[i] for a, i in zip(axes, idx)], axis=1)
    # one Newton step from every node (finite-difference Hessian); a target
    # within a cell is a zero even when its |grad|^2 valley runs into another's
    m = len(box)
    H = np.stack([np.stack(np.gradient(G[..., i], step), axis=-1) for i in range(m)], axis=-2)
    H = 0.5 * (H + np.swapaxes(H, -1, -2)).reshape(-1, m, m)
    g = G.reshape(-1, m)
    lam, U = np.linalg.eigh(H)
    lam = np.where(np.abs(lam) < 1e-300, 1e-300, lam)
    delta = -np.einsum("pij,pj->pi", U, np.einsum("pji,pj->pi", U, g) / lam)
    close = np.max(np.abs(delta), axis=1) < step
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    targets = nodes[close] + delta[close]
    centres = np.vstack([centres, targets])
    lo = np.array([b[0] for b in box]) - step
    hi = np.array([b[1] for b in box]) + step
    centres = centres[np.all((centres > lo) & (centres < hi), axis=1)]
    return _unseen(centres, known, step)


def _partner_seeds(f: FieldRealization, X, h):
    """Seeds at the predicted fold partner of each critical point in X.

    Near a fold a critical point with a soft Hessian eigenvalue ``lam``
    (eigenvector v) has a partner at about ``2 t0`` along v, where
    ``t0 = -lam / D^3 Phi[v, v, v]`` is where the eigenvalue crosses zero.
    Such pairs can sit closer than any seed grid; only partners predicted
    within ``h`` are returned.
    """
    if not len(X):
        return np.empty((0, f.dim))
    _, _, H = f.jets(X)
    lam, U = np.linalg.eigh(H)
    k = np.argmin(np.abs(lam), axis=1)
    rows = np.arange(len(X))
    soft, v = lam[rows, k], U[rows, :, k]
    c = f.third_directional(X, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(c != 0, -soft / c, np.inf)
    near = np.abs(2 * t0) < h
    X, v, t0 = X[near], v[near], t0[near]
    return np.vstack([X + 2 * t0[:, None] * v, X + 1.5 * t0[:, None] * v])


def _dedup(X, resid, radius):
    """Keep the smallest-residual representative of every cluster within ``radius``."""
    if not len(X):
        return np.zeros(0, dtype=int)
    order = np.argsort(resid, kind="stable")
    tree = cKDTree(X)
    taken = np.zeros(len(X), bool)
    keep = []
    for i in order:
        if taken[i]:
            continue
        keep.append(i)
        taken[tree.query_ball_point(X[i], radius)] = True
    return np.array(keep, dtype=int)


def _unique(X, resid, radius):
    keep = _dedup(X, resid, radius)
    return X[keep], resid[keep]


def _unseen(X, known, radius):
    """Rows of X with no point of ``known`` within ``radius``."""
    if not len(known):
        return X
    near = cKDTree(known).query_ball_point(X, radius) if len(X) else []
    return X[[not hits for hits in near]] if len(X) else X


def _collect(X, resid, box, opts):
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    ok = (resid <= opts.newton_tol) & np.all((X > lo) & (X < hi), axis=1)
    return X[ok], resid[ok]


def find_critical_points(f: FieldRealization, box, opts: CensusOptions) -> CriticalCensus:
    """All critical points of ``f`` strictly inside ``box`` that Newton's method finds.

    Seeds are the nodes of a grid of spacing ``h`` covering the box enlarged
    by ``2h``; points that converge outside the original box are dropped so
    that boundary basins are never counted twice.

    With ``opts.audit`` a second pass runs on a grid four times finer.  In
    one dimension it brackets every sign change of the derivative.  In
    higher dimensions it seeds from local minima of ``|grad|^2`` that no
    known point explains.  Every point with a soft Hessian direction then
    seeds a search for its fold partner, which is the close pair a coarse
    grid tends to merge.  Points found only by the audit are kept and
    logged at WARNING.
    """
    box = _as_box(box)
    if len(box) != f.dim:
        raise ValueError("box dimension does not match the field")
    seeds, _ = _grid(box, opts.h, 2 * opts.h)
    P, resid = _collect(seeds, _newton(f, seeds, opts, box), box, opts)
    primary = P[_dedup(P, resid, opts.dedup_radius)]
    added = 0
    if opts.audit:
        aseeds = _audit_seeds(f, box, opts.h, primary)
        Q, qres = _collect(aseeds, _newton(f, aseeds, opts, box), box, opts)
        known, frontier = primary, np.vstack([primary, Q])
        for _ in range(3):
            # fold partners of everything new, until nothing new turns up
            pseeds = _partner_seeds(f, frontier, opts.h)
            R, rres = _collect(pseeds, _newton(f, pseeds, opts, box), box, opts)
            Q, qres = np.vstack([Q, R]), np.concatenate([qres, rres])
            Q, qres = _unique(Q, qres, opts.dedup_radius)
            frontier = _unseen(Q, known, opts.dedup_radius)
            if not len(frontier):
                break
            for q in frontier:
                added += 1
                log.warning("audit pass found a point the grid pass missed at %s", q)
            known = np.vstack([known, frontier])
        P = np.vstack([P, Q])
        resid = np.concatenate([resid, qres])
    keep = _dedup(P, resid, opts.dedup_radius)
    X = P[keep]
    X = X[np.lexsort(X.T[::-1])] if len(X) else X
    vals, grads, hess = f.jets(X) if len(X) else (np.empty(0), np.empty((0, f.dim)), np.empty((0, f.dim, f.dim)))
    points, flagged = [], []
    for x, v, g, H in zip(X, vals, grads, hess):
        lam = np.linalg.eigvalsh(H)
        pt = CriticalPoint(x.copy(), float(v), float(np.linalg.norm(g)),
                           int(np.sum(lam < 0)), float(np.min(np.abs(lam))))
        if pt.min_abs_hess_eig > opts.hess_tol:
            points.append(pt)
        else:
            log.warning("degenerate critical point at %s (min |eig| %.3e)", x, pt.min_abs_hess_eig)
            flagged.append(pt)
    return CriticalCensus(box, tuple(points), opts, tuple(flagged), added)


# ---------------------------------------------------------------------------
# test functions

# int_{-1}^{1} (1 - u^2)^n du = 2^(2n+1) (n!)^2 / (2n+1)!
BUMP_INTEGRAL = 2.0 ** 7 * math.factorial(3) ** 2 / math.factorial(7)
BUMP_SQ_INTEGRAL = 2.0 ** 13 * math.factorial(6) ** 2 / math.factorial(13)


@dataclass(frozen=True)
class TestFunction:
    """Box indicator or tensor bump ``prod (1 - u_j^2)^3`` on a support box.

    ``R`` realizes the scaled function ``f_R(x) = f(x / R)``; ``height``
    multiplies the whole function.
    """
    __test__ = False  # not a pytest class

    kind: str
    support: tuple[tuple[float, float], ...]
    R: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.kind not in ("box", "bump"):
            raise ValueError("kind must be 'box' or 'bump'")
        object.__setattr__(self, "support", _as_box(self.support))
        if not self.R >= 1:
            raise ValueError("scale R must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.support)

    def at_scale(self, R: float) -> "TestFunction":
        return replace(self, R=float(R))

    def scaled_support(self) -> tuple[tuple[float, float], ...]:
        return tuple((self.R * lo, self.R * hi) for lo, hi in self.support)

    def __call__(self, X) -> np.ndarray:
        """``f(X)`` for unscaled points X (rows)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo = np.array([b[0] for b in self.support])
        hi = np.array([b[1] for b in self.support])
        if self.kind == "box":
            inside = np.all((X >= lo) & (X <= hi), axis=1)
            return self.height * inside.astype(float)
        u = 2 * (X - lo) / (hi - lo) - 1
        vals = np.where(np.abs(u) < 1, (1 - u * u) ** 3, 0.0)
        return self.height * np.prod(vals, axis=1)

    def integral(self) -> float:
        """``int f`` (unscaled)."""
        widths = [hi - lo for lo, hi in self.support]
        if self.kind == "box":
            return self.height * math.prod(widths)
        return self.height * math.prod(w / 2 * BUMP_INTEGRAL for w in widths)

    def integral_sq(self) -> float:
        widths = [hi - lo for lo, hi in self.support]
        if self.kind == "box":
            return self.height ** 2 * math.prod(widths)
        return self.height ** 2 * math.prod(w / 2 * BUMP_SQ_INTEGRAL for w in widths)


def weigh(c: CriticalCensus, f: TestFunction) -> float:
    """``sum_x f(x / R)`` over the census points, i.e. the pairing with ``f_R``."""
    if f.dim != len(c.box):
        raise ValueError("test function dimension does not match the census")
    for (flo, fhi), (blo, bhi) in zip(f.scaled_support(), c.box):
        slack = 1e-12 * max(abs(blo), abs(bhi), 1.0)
        if flo < blo - slack or fhi > bhi + slack:
            raise SupportError(f"support {f.scaled_support()} not inside census box {c.box}")
    if not c.points:
        return 0.0
    return float(math.fsum(f(c.locations() / f.R)))
