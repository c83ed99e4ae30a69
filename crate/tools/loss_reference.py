"""High-precision reference values for the converter loss model.

Usage: python3 tools/loss_reference.py
"""
from mpmath import cot, mp, mpf, pi, sqrt

mp.dps = 40

# Switching loss current: 2·(t_on + t_off + t_rec)/t_s · (1/N) · cot(π/N) · |I|
t_sum, t_s, n, i_mag = mpf("2e-6"), mpf("100e-6"), mpf(200), mpf(1)
print("switching current:", 2 * t_sum / t_s / n * cot(pi / n) * i_mag)

# Piecewise-linear R_eq between (0, 0.01) and (2, 0.02) at |I| = sqrt(2)
print("r_eq(sqrt 2):", mpf("0.01") + (mpf("0.02") - mpf("0.01")) / 2 * sqrt(2))
