"""Confidence intervals for proportions and means."""

import math

import numpy as np
from scipy import stats

Z95 = float(stats.norm.ppf(0.975))
WILSON_BELOW = 30


def wilson(hits, n, z=Z95):
    if n == 0:
        return 0.0, 1.0
    p = hits / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    rad = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - rad), min(1.0, mid + rad)


def proportion_ci(hits, n, z=Z95):
    """95% interval for a binomial proportion: normal approximation, Wilson for small counts."""
    hits, n = int(hits), int(n)
    if n == 0:
        return math.nan, 0.0, 1.0
    p = hits / n
    if hits < WILSON_BELOW or n - hits < WILSON_BELOW:
        lo, hi = wilson(hits, n, z)
    else:
        rad = z * math.sqrt(p * (1 - p) / n)
        lo, hi = p - rad, p + rad
    return p, lo, hi


def proportion_half_width(hits, n, z=Z95):
    _, lo, hi = proportion_ci(hits, n, z)
    return 0.5 * (hi - lo)


def mean_se(total, total_sq, n):
    """Sample mean and its standard error from a sum and a sum of squares."""
    if n < 1:
        return math.nan, math.nan
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def ks_two_sample(a, b):
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    return float(stats.ks_2samp(a, b).statistic)
