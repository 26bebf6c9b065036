"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.special import erf, expit

INV_SQRT_PI = 0.56418958354775628695


def _eval(code, x):
    if code == 0:
        return x.copy(), np.ones_like(x)
    if code == 1:
        pos = x > 0
        return np.where(pos, x, 0.0), pos.astype(float)
    if code == 2:
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))), expit(x)
    if code == 3:
        s = expit(x)
        return s, s * (1.0 - s)
    if code == 4:
        t = np.tanh(x)
        return t, 1.0 - t * t
    if code == 5:
        e = erf(x)
        return 0.5 * x * (1.0 + e), 0.5 * (1.0 + e) + x * np.exp(-x * x) * INV_SQRT_PI
    if code == 6:
        s = expit(x)
        return x * s, s + x * s * (1.0 - s)
    if code == 7:
        pos = x > 0
        neg = np.minimum(x, 0.0)
        return np.where(pos, x, np.expm1(neg)), np.where(pos, 1.0, np.exp(neg))
    if code == 8:
        t = np.tanh(x)
        return x * t, t + x * (1.0 - t * t)
    if code == 9:
        return np.abs(x), np.sign(x)
    raise ValueError(f"unknown kernel code {code}")


def forward(code, x, slope, shift, scale, want_value=True, want_deriv=True):
    f, df = _eval(code, x)
    inv = 1.0 / scale
    out_f = (f - slope * x - shift) * inv if want_value else None
    out_d = (df - slope) * inv if want_deriv else None
    return out_f, out_d


def hermite_table(n_max, x):
    """Rows are He_n(x)/sqrt(n!) for n = 0..n_max."""
    out = np.empty((n_max + 1, x.shape[0]))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for n in range(1, n_max):
        out[n + 1] = (x * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1)
    return out
