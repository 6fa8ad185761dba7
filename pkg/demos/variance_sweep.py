"""Variance of the count on growing intervals, against V_1.

Counts critical points of 1-D realizations on [0, R] for a few R and prints
Var / R next to V_1 from the two-point integral.  The ratio approaches V_1
from above like 1/R.  Use more reps (the acceptance run uses 2000) for
tight error bars.

    python3 demos/variance_sweep.py [reps]
"""
import logging
import sys

from isocrit.harness import ExperimentConfig, run_variance_sweep

# the census logs every audit find; the sweep only needs the counts
logging.getLogger("isocrit").setLevel(logging.ERROR)
reps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
cfg = ExperimentConfig(dim=1, scales=(5.0, 10.0, 20.0), reps=reps, seed=4)
res = run_variance_sweep(cfg)
v, err = res.constants["v_m"], res.constants["v_m_err"]
print(f"V_1 = {v:.4f} +- {err:.4f}")
for s in res.per_scale:
    print(f"R = {s.scale:5.1f}: mean/R = {s.ratio_mean:.4f}   var/R = {s.ratio_var:.4f} +- {s.var_se / s.scale:.4f}")
