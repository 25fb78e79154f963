"""Barrier profile shared by the maximizer and its kernels.

H(t) = t^4 + 16 (1-t)^-4 - 64 t - 16 on t < 1: smooth, convex,
nonnegative (H(0) = H'(0) = 0), growing like t^4 for t << 0 and blowing
up like 16 (1-t)^-4 at the wall. The staged barrier is H(2^j t), defined
for t < 2^-j.
"""

from __future__ import annotations

import numpy as np


def penalty_value(t):
    t = np.asarray(t, dtype=float)
    o = 1.0 - t
    return t ** 4 + 16.0 / o ** 4 - 64.0 * t - 16.0


def penalty_slope(t):
    t = np.asarray(t, dtype=float)
    o = 1.0 - t
    return 4.0 * t ** 3 + 64.0 / o ** 5 - 64.0
