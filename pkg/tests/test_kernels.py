import numpy as np
import pytest

from statnorm import kernels

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(scope="module")
def grid():
    return np.concatenate([np.linspace(-30, 30, 2001), [0.0, -0.0, 1e-300, -1e-300]])


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
@pytest.mark.parametrize("name", sorted(kernels.CODES))
def test_backends_agree(name, grid):
    code = kernels.CODES[name]
    fp, dp = kernels.activation_forward(code, grid, 0.3, -0.2, 1.7, backend="python")
    fc, dc = kernels.activation_forward(code, grid, 0.3, -0.2, 1.7, backend="cython")
    np.testing.assert_allclose(fc, fp, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(dc, dp, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_value_only_and_derivative_only(backend, grid):
    f, d = kernels.activation_forward(kernels.CODES["tanh"], grid, want_deriv=False, backend=backend)
    assert d is None
    np.testing.assert_allclose(f, np.tanh(grid), rtol=1e-14)
    f, d = kernels.activation_forward(kernels.CODES["tanh"], grid, want_value=False, backend=backend)
    assert f is None
    np.testing.assert_allclose(d, 1 - np.tanh(grid) ** 2, atol=1e-15)


@pytest.mark.parametrize("backend", BACKENDS)
def test_affine_wrapper(backend):
    x = np.linspace(-2, 2, 9)
    f, d = kernels.activation_forward(kernels.CODES["relu"], x, 0.5, 0.25, 2.0, backend=backend)
    np.testing.assert_allclose(f, (np.maximum(x, 0) - 0.5 * x - 0.25) / 2.0)
    np.testing.assert_allclose(d, ((x > 0) - 0.5) / 2.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_shape_preserved(backend):
    x = np.arange(12.0).reshape(3, 4) - 6
    f, d = kernels.activation_forward(kernels.CODES["abs"], x, backend=backend)
    assert f.shape == (3, 4) and d.shape == (3, 4)


@pytest.mark.parametrize("backend", BACKENDS)
def test_hermite_table_backends(backend):
    x = np.linspace(-5, 5, 101)
    t = kernels.hermite_table(10, x, backend=backend)
    np.testing.assert_allclose(t[3], (x ** 3 - 3 * x) / np.sqrt(6), atol=1e-12)
    np.testing.assert_allclose(t, kernels.hermite_table(10, x, backend="python"), rtol=1e-13, atol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_pure_python_switch():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "import statnorm; print(statnorm.BACKEND)"],
                         env={"STATNORM_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
