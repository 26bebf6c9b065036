"""Backend selection for the elementwise kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Set ``STATNORM_PURE_PYTHON=1`` to force the fallback.

Even with the extension present, transcendental activations are routed to
numpy: its SIMD ``tanh``/``exp`` beat a scalar libm loop, while the fused
compiled loop wins for the piecewise-linear ones (see
``benchmarks/bench_kernels.py``).
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("STATNORM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

CODES = {
    "linear": 0,
    "relu": 1,
    "softplus": 2,
    "sigmoid": 3,
    "tanh": 4,
    "gelu": 5,
    "swish": 6,
    "elu": 7,
    "xtanh": 8,
    "abs": 9,
}


# kernels that run faster compiled than as numpy expressions
COMPILED_CODES = frozenset({CODES["linear"], CODES["relu"], CODES["abs"]})


def get_backend(name=None):
    """Return a kernel module by name (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels as compiled

        return compiled
    raise ValueError(f"unknown backend {name!r}")


def activation_forward(code, x, slope=0.0, shift=0.0, scale=1.0, want_value=True,
                       want_deriv=True, backend=None):
    arr = np.asarray(x, dtype=np.float64)
    shape = arr.shape
    flat = np.ascontiguousarray(arr).reshape(-1)
    if backend is None and code not in COMPILED_CODES:
        backend = "python"
    f, df = get_backend(backend).forward(code, flat, float(slope), float(shift), float(scale),
                                         want_value, want_deriv)
    if f is not None:
        f = f.reshape(shape)
    if df is not None:
        df = df.reshape(shape)
    return f, df


def hermite_table(n_max, x, backend=None):
    flat = np.ascontiguousarray(np.asarray(x, dtype=np.float64)).reshape(-1)
    return get_backend(backend).hermite_table(int(n_max), flat)
