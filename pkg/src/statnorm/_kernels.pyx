# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels; mirrors ``_kernels_py`` one to one."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erf, exp, expm1, fabs, log1p, sqrt, tanh

cnp.import_array()

cdef double INV_SQRT_PI = 0.56418958354775628695


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _eval(int code, double x, double *f, double *df) noexcept nogil:
    cdef double s, t
    if code == 0:
        f[0] = x
        df[0] = 1.0
    elif code == 1:
        if x > 0:
            f[0] = x
            df[0] = 1.0
        else:
            f[0] = 0.0
            df[0] = 0.0
    elif code == 2:
        f[0] = (x if x > 0 else 0.0) + log1p(exp(-fabs(x)))
        df[0] = _sigmoid(x)
    elif code == 3:
        s = _sigmoid(x)
        f[0] = s
        df[0] = s * (1.0 - s)
    elif code == 4:
        t = tanh(x)
        f[0] = t
        df[0] = 1.0 - t * t
    elif code == 5:
        f[0] = 0.5 * x * (1.0 + erf(x))
        df[0] = 0.5 * (1.0 + erf(x)) + x * exp(-x * x) * INV_SQRT_PI
    elif code == 6:
        s = _sigmoid(x)
        f[0] = x * s
        df[0] = s + x * s * (1.0 - s)
    elif code == 7:
        if x > 0:
            f[0] = x
            df[0] = 1.0
        else:
            f[0] = expm1(x)
            df[0] = exp(x)
    elif code == 8:
        t = tanh(x)
        f[0] = x * t
        df[0] = t + x * (1.0 - t * t)
    elif code == 9:
        f[0] = fabs(x)
        df[0] = 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
    else:
        f[0] = x * 0.0 / 0.0
        df[0] = f[0]


def forward(int code, const double[::1] x, double slope, double shift, double scale,
            bint want_value=True, bint want_deriv=True):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double f, df, s, t, e, xi, inv = 1.0 / scale
    out_f = np.empty(n)
    out_d = np.empty(n)
    cdef double[::1] vf = out_f
    cdef double[::1] vd = out_d
    if code < 0 or code > 9:
        raise ValueError(f"unknown kernel code {code}")
    with nogil:
        # one loop per code keeps the bodies branch-light and vectorisable
        if code == 0:
            for i in range(n):
                vf[i] = (x[i] - slope * x[i] - shift) * inv
                vd[i] = (1.0 - slope) * inv
        elif code == 1:
            for i in range(n):
                xi = x[i]
                f = xi if xi > 0 else 0.0
                df = 1.0 if xi > 0 else 0.0
                vf[i] = (f - slope * xi - shift) * inv
                vd[i] = (df - slope) * inv
        elif code == 9:
            for i in range(n):
                xi = x[i]
                f = fabs(xi)
                df = 1.0 if xi > 0 else (-1.0 if xi < 0 else 0.0)
                vf[i] = (f - slope * xi - shift) * inv
                vd[i] = (df - slope) * inv
        elif code == 4:
            for i in range(n):
                xi = x[i]
                t = tanh(xi)
                vf[i] = (t - slope * xi - shift) * inv
                vd[i] = (1.0 - t * t - slope) * inv
        elif code == 7:
            for i in range(n):
                xi = x[i]
                if xi > 0:
                    f = xi
                    df = 1.0
                else:
                    df = exp(xi)
                    f = expm1(xi)
                vf[i] = (f - slope * xi - shift) * inv
                vd[i] = (df - slope) * inv
        else:
            for i in range(n):
                _eval(code, x[i], &f, &df)
                vf[i] = (f - slope * x[i] - shift) * inv
                vd[i] = (df - slope) * inv
    return (out_f if want_value else None), (out_d if want_deriv else None)


def hermite_table(int n_max, const double[::1] x):
    """Rows are He_n(x)/sqrt(n!) for n = 0..n_max."""
    cdef Py_ssize_t i, n, m = x.shape[0]
    out = np.empty((n_max + 1, m))
    cdef double[:, ::1] h = out
    with nogil:
        for i in range(m):
            h[0, i] = 1.0
        if n_max >= 1:
            for i in range(m):
                h[1, i] = x[i]
        for n in range(1, n_max):
            for i in range(m):
                h[n + 1, i] = (x[i] * h[n, i] - sqrt(<double>n) * h[n - 1, i]) / sqrt(<double>(n + 1))
    return out
