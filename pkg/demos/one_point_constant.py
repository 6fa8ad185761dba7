"""How many critical points per unit volume?

Prints the spectral moments s, d, h for a few amplitudes and the resulting
density C_m, then compares the one-dimensional value with Rice's classical
sqrt(lambda_4 / lambda_2) / pi.

    python3 demos/one_point_constant.py
"""
import math

from isocrit import Amplitude, one_point_constant, spectral_moments

AMPLITUDES = ["gaussian", "gaussian-scaled:2", "poly-gaussian:0.5"]

print(f"{'amplitude':>20} {'m':>2} {'s_m':>10} {'d_m':>10} {'h_m':>10} {'C_m':>10} {'+-':>8}")
for name in AMPLITUDES:
    a = Amplitude.parse(name)
    for m in (1, 2, 3):
        mom = spectral_moments(a, m)
        one = one_point_constant(a, m, n_mc=200_000, seed=1)
        print(f"{name:>20} {m:>2} {mom.s:10.6f} {mom.d:10.6f} {mom.h:10.6f} {one.c_m:10.6f} {one.stderr:8.1e}")

# in 1-D the fourth spectral moment is 3h, so Rice's formula reads sqrt(3h/d)/pi
mom = spectral_moments(Amplitude(), 1)
print("\nRice, gaussian amplitude, m=1:", math.sqrt(3 * mom.h / mom.d) / math.pi)
