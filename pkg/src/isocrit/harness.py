"""End-to-end experiments: expectation and variance sweeps, LLN trajectories, file output.

Every rep is an independent field realization drawn from the stream
``(seed, scale index, rep index)``; the census runs on the support of the
scaled test function ``f_R`` and the rep records the number of points and
the pairing ``sum f(x / R)``.  Summaries are always recomputed from the rows.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngmod
from .amplitude import Amplitude
from .census import TestFunction, default_options, find_critical_points, weigh
from .field import DEFAULT_WAVES, sample_field
from .kacrice import (QuadOptions, VarianceConstants, one_point_constant, reference_constant,
                      z_constant)
from .spectral import spectral_moments

log = logging.getLogger(__name__)

ROW_HEADER = ("scale", "rep", "count", "weighted")
SCALE_KEYS = ("scale", "mean", "var", "mean_se", "var_se", "ratio_mean", "ratio_var")
CONSTANT_KEYS = ("c_m", "c_m_se", "z_m", "z_m_err", "v_m", "v_m_err")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep.  ``scales`` are the R values (or N values for LLN runs)."""
    dim: int
    amplitude: Amplitude = field(default_factory=Amplitude)
    f_kind: str = "box"
    support: tuple | None = None
    f_height: float = 1.0
    scales: tuple = (1.0,)
    reps: int = 2
    n_waves: int = DEFAULT_WAVES
    seed: int = 0
    workers: int | None = None
    mc_samples: int = 10 ** 6
    rows_path: str | None = None
    summary_path: str | None = None
    constants: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.reps < 2:
            raise ValueError("reps must be >= 2 (variance is undefined otherwise)")
        scales = tuple(float(s) for s in self.scales)
        if not scales or any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be nonempty and strictly increasing")
        if scales[0] < 1:
            raise ValueError("scales must be >= 1")
        object.__setattr__(self, "scales", scales)
        support = self.support or ((0.0, 1.0),) * self.dim
        object.__setattr__(self, "support", tuple((float(lo), float(hi)) for lo, hi in support))
        if len(self.support) != self.dim:
            raise ValueError("support dimension does not match dim")
        if isinstance(self.amplitude, str):
            object.__setattr__(self, "amplitude", Amplitude.parse(self.amplitude))

    @property
    def test_function(self) -> TestFunction:
        return TestFunction(self.f_kind, self.support, height=self.f_height)

    def echo(self) -> dict:
        out = asdict(self)
        out["amplitude"] = str(self.amplitude)
        out["support"] = [list(b) for b in self.support]
        out["scales"] = list(self.scales)
        return out


@dataclass(frozen=True)
class ScaleSummary:
    scale: float
    mean: float
    var: float
    mean_se: float
    var_se: float
    ratio_mean: float
    ratio_var: float


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    rows: tuple                  # (scale, rep, count, weighted)
    per_scale: tuple[ScaleSummary, ...]
    constants: dict | None = None

    def values(self, scale_index: int) -> np.ndarray:
        s = self.config.scales[scale_index]
        return np.array([w for sc, _, _, w in self.rows if sc == s])


def jackknife(values) -> tuple[float, float, float, float]:
    """``(mean, var, mean_se, var_se)`` with leave-one-out jackknife errors.

    With two values the variance has no leave-one-out version; its error is
    then the normal-theory ``var * sqrt(2 / (n - 1))``.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("jackknife needs at least 2 values")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if n == 2:
        return mean, var, float(abs(x[0] - x[1]) / 2), var * math.sqrt(2.0)
    s1, s2 = x.sum(), (x * x).sum()
    loo_mean = (s1 - x) / (n - 1)
    loo_var = (s2 - x * x - (s1 - x) ** 2 / (n - 1)) / (n - 2)
    jk = lambda th: float(math.sqrt((n - 1) / n * np.sum((th - th.mean()) ** 2)))
    return mean, max(var, 0.0), jk(loo_mean), jk(loo_var)


def summarize(cfg: ExperimentConfig, rows) -> tuple[ScaleSummary, ...]:
    f = cfg.test_function
    out = []
    for s in cfg.scales:
        vals = [w for sc, _, _, w in rows if sc == s]
        if len(vals) < 2:
            continue
        mean, var, mse, vse = jackknife(vals)
        vol = s ** cfg.dim
        i1, i2 = f.integral(), f.integral_sq()
        # f = 0 leaves the normalized ratios undefined
        out.append(ScaleSummary(s, mean, var, mse, vse,
                                mean / (vol * i1) if i1 else math.nan,
                                var / (vol * i2) if i2 else math.nan))
    return tuple(out)


def census_options(a: Amplitude, m: int):
    mom = spectral_moments(a, m)
    return default_options(m, reference_constant(a, m).c_m, mom.d, mom.h)


def run_rep(cfg: ExperimentConfig, scale_index: int, rep: int, opts=None):
    """One realization: ``(count, weighted, census)``."""
    R = cfg.scales[scale_index]
    f = cfg.test_function.at_scale(R)
    field_ = sample_field(cfg.amplitude, cfg.dim, cfg.n_waves, rngmod.stream(cfg.seed, scale_index, rep))
    c = find_critical_points(field_, f.scaled_support(), opts or census_options(cfg.amplitude, cfg.dim))
    return c.count, weigh(c, f), c


def validate_paths(*paths):
    """Fail before any computation if an output path cannot be written."""
    for p in paths:
        if p is None:
            continue
        d = os.path.dirname(os.path.abspath(p)) or "."
        if not os.path.isdir(d) or not os.access(d, os.W_OK):
            raise OSError(f"cannot write to {p!r}")
        if os.path.exists(p) and not os.access(p, os.W_OK):
            raise OSError(f"cannot write to {p!r}")


def _sweep(cfg: ExperimentConfig, constants_fn=None) -> SweepResult:
    validate_paths(cfg.rows_path, cfg.summary_path)
    opts = census_options(cfg.amplitude, cfg.dim)
    jobs = [(i, r) for i in range(len(cfg.scales)) for r in range(cfg.reps)]
    rows = []
    sink = open(cfg.rows_path, "w", newline="") if cfg.rows_path else None
    try:
        writer = csv.writer(sink) if sink else None
        if writer:
            writer.writerow(ROW_HEADER)
        nw = rngmod.worker_count(cfg.workers)

        def work(job):
            count, weighted, _ = run_rep(cfg, job[0], job[1], opts)
            return cfg.scales[job[0]], job[1], count, weighted

        pool = ThreadPoolExecutor(nw) if nw > 1 else None
        results = pool.map(work, jobs) if pool else map(work, jobs)
        try:
            # map yields in job order, so rows are flushed in (scale, rep) order
            for row in results:
                rows.append(row)
                if writer:
                    writer.writerow(_fmt_row(row))
                    sink.flush()
        finally:
            if pool:
                pool.shutdown(cancel_futures=True)
    finally:
        if sink:
            sink.close()
    constants = constants_fn() if (constants_fn and cfg.constants) else None
    result = SweepResult(cfg, tuple(rows), summarize(cfg, rows), constants)
    if cfg.summary_path:
        write_summary(result, cfg.summary_path)
    return result


def _fmt_row(row):
    scale, rep, count, weighted = row
    return [repr(scale), rep, count, repr(float(weighted))]


def _constants_one(cfg):
    one = one_point_constant(cfg.amplitude, cfg.dim, cfg.mc_samples, seed=cfg.seed)
    return {"c_m": one.c_m, "c_m_se": one.stderr, "z_m": None, "z_m_err": None,
            "v_m": None, "v_m_err": None}


def _constants_full(cfg):
    one = one_point_constant(cfg.amplitude, cfg.dim, cfg.mc_samples, seed=cfg.seed)
    vc = z_constant(cfg.amplitude, cfg.dim, QuadOptions(), seed=cfg.seed, one_point=one)
    return constants_dict(vc)


def constants_dict(vc: VarianceConstants) -> dict:
    return {"c_m": vc.c_m, "c_m_se": vc.c_m_se, "z_m": vc.z_m, "z_m_err": float(vc.z_m_err),
            "v_m": vc.v_m, "v_m_err": float(vc.v_m_err)}


def run_expectation(cfg: ExperimentConfig) -> SweepResult:
    """Mean of ``c[f_R]`` per scale; ``ratio_mean`` estimates ``C_m``."""
    return _sweep(cfg, lambda: _constants_one(cfg))


def run_variance_sweep(cfg: ExperimentConfig, min_reps: int = 500) -> SweepResult:
    """Variance of ``c[f_R]`` per scale; ``ratio_var`` estimates ``V_m`` as R grows."""
    if cfg.reps < min_reps:
        raise ValueError(f"variance sweeps need reps >= {min_reps}")
    return _sweep(cfg, lambda: _constants_full(cfg))


def run_lln(cfg: ExperimentConfig) -> SweepResult:
    """``L_N[f] = N^-m c[f_N]`` for the N values in ``cfg.scales``.

    ``ratio_mean`` is the mean of ``L_N[f] / int f`` and ``ratio_var`` is
    ``N^m Var[L_N[f]] / int f^2``; the first should sit at ``C_m`` and the
    second stay of constant order for every N.
    """
    if len(cfg.scales) < 3:
        raise ValueError("LLN runs need at least 3 scales")
    return _sweep(cfg, lambda: _constants_full(cfg))


def lln_values(result: SweepResult, scale_index: int) -> np.ndarray:
    N = result.config.scales[scale_index]
    return result.values(scale_index) / N ** result.config.dim


# ---------------------------------------------------------------------------
# output


def _finite_or_none(x):
    return x if math.isfinite(x) else None


def summary_dict(result: SweepResult) -> dict:
    return {
        "config_echo": result.config.echo(),
        "per_scale": [{k: _finite_or_none(getattr(s, k)) for k in SCALE_KEYS} for s in result.per_scale],
        "constants": {k: (result.constants or {}).get(k) for k in CONSTANT_KEYS},
    }


def write_summary(result: SweepResult, path: str):
    with open(path, "w") as fh:
        json.dump(summary_dict(result), fh, indent=2)


def write_rows(rows, path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROW_HEADER)
        for row in rows:
            w.writerow(_fmt_row(row))


def emit(result: SweepResult, rows_path: str | None = None, summary_path: str | None = None):
    """Write the rows CSV and/or the summary JSON."""
    validate_paths(rows_path, summary_path)
    if rows_path:
        write_rows(result.rows, rows_path)
    if summary_path:
        write_summary(result, summary_path)


def census_rows(rep: int, census) -> list[list]:
    """Rows ``rep,x1..xm,value,grad_norm,morse_index`` for one census."""
    return [[rep, *(repr(float(x)) for x in p.location), repr(p.value), repr(p.grad_norm),
             p.morse_index] for p in census.points]


def census_header(m: int) -> list[str]:
    return ["rep", *(f"x{i + 1}" for i in range(m)), "value", "grad_norm", "morse_index"]


def simulate(a: Amplitude, m: int, L: float, n_waves: int, reps: int, seed: int,
             out: str | None = None, workers: int | None = None):
    """Census of ``reps`` realizations on ``[0, L]^m``; returns the list of censuses."""
    validate_paths(out)
    opts = census_options(a, m)
    box = ((0.0, float(L)),) * m

    def work(rep):
        fld = sample_field(a, m, n_waves, rngmod.stream(seed, 0, rep))
        return find_critical_points(fld, box, opts)

    nw = rngmod.worker_count(workers)
    if nw > 1:
        with ThreadPoolExecutor(nw) as pool:
            censuses = list(pool.map(work, range(reps)))
    else:
        censuses = [work(r) for r in range(reps)]
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(census_header(m))
            for rep, c in enumerate(censuses):
                w.writerows(census_rows(rep, c))
    return censuses


def read_summary(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
