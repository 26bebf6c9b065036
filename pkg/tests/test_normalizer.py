import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from statnorm import get, make_activation, names
from statnorm.errors import DegenerateError, InvalidArgumentError
from statnorm.hermite import expand
from statnorm.normalizer import (PUBLISHED_TABLE, NormalizationContext, compare_to_published,
                                 compute_coefficients, lipschitz_constant, normalize, normalized,
                                 recompute_diagnostics, unit_lipschitz)
from statnorm.quadrature import integrate, rule_for

SQRT_2_PI = math.sqrt(2 / math.pi)


def test_default_context():
    ctx = NormalizationContext()
    assert (ctx.sigma_w, ctx.sigma_x, ctx.q_star) == (1.0, 1.0, 1.0)
    assert NormalizationContext(2.0, 1.5).q_star == 9.0


@pytest.mark.parametrize("kwargs", [{"sigma_w": 0}, {"sigma_x": -1.0}, {"q_star": 0.0}, {"sigma_w": float("nan")}])
def test_context_rejects_nonpositive(kwargs):
    with pytest.raises(InvalidArgumentError):
        NormalizationContext(**kwargs)


def test_relu_coefficients_closed_form():
    c = compute_coefficients(get("relu"))
    assert abs(c.alpha - 0.5) < 1e-12
    assert abs(c.beta - 1 / math.sqrt(2 * math.pi)) < 1e-12
    assert abs(c.gamma - math.sqrt(0.25 - 1 / (2 * math.pi))) < 1e-12
    assert abs(c.gamma - 0.301405) < 1e-5
    assert abs(c.m2_squared - 0.25) < 1e-12
    assert abs(c.m4 - 0.5) < 1e-12
    assert c.rule_kind == "piecewise"


def test_tanh_coefficients():
    c = compute_coefficients(get("tanh"))
    assert abs(c.alpha - 0.605706) < 1e-4
    assert abs(c.beta) < 1e-8
    assert abs(c.gamma - 0.165576) < 1e-4


@pytest.mark.parametrize("name", names())
def test_coefficient_invariants(name):
    a = get(name)
    c = compute_coefficients(a)
    assert abs(c.xi - c.alpha ** 2) < 1e-10
    resid = integrate(rule_for(a.kinks), lambda z: (a.value(z) - c.alpha * z - c.beta) ** 2)
    assert abs(c.gamma ** 2 - resid) < 1e-8
    assert c.m4 >= c.m2 ** 2
    assert c.gamma > 0 and c.eta > 0


def test_homogeneous_scaling():
    # relu(s z) = s relu(z): slope fixed, mean and gamma scale with s
    c = compute_coefficients(get("relu"), NormalizationContext(sigma_w=2.0, sigma_x=1.5))
    assert abs(c.alpha - 0.5) < 1e-12
    assert abs(c.beta - 3.0 / math.sqrt(2 * math.pi)) < 1e-12
    assert abs(c.gamma - 3.0 * math.sqrt(0.25 - 1 / (2 * math.pi))) < 1e-12


def test_scaled_context_for_smooth_activation_by_oracle():
    ctx = NormalizationContext(sigma_w=1.3)
    c = compute_coefficients(get("tanh"), ctx)
    x = np.linspace(-12, 12, 400001)
    w = np.exp(-x * x / 2) / math.sqrt(2 * math.pi) * (x[1] - x[0])
    assert abs(c.alpha - np.sum(w / np.cosh(1.3 * x) ** 2)) < 1e-9
    assert abs(c.eta - np.sum(w * np.tanh(1.3 * x) ** 2)) < 1e-9


def test_affine_activation_is_degenerate():
    ident = make_activation("identity", lambda x: 2 * x + 1, lambda x: 2 * np.ones_like(x))
    with pytest.raises(DegenerateError):
        compute_coefficients(ident)


def test_mismatched_coefficients():
    with pytest.raises(InvalidArgumentError):
        normalize(get("tanh"), compute_coefficients(get("relu")))


def test_normalized_relu_at_zero():
    c = compute_coefficients(get("relu"))
    assert abs(normalize(get("relu"), c).value(0.0) - (-c.beta / c.gamma)) < 1e-15
    assert abs(normalize(get("relu"), c).value(0.0) + 1.3236) < 1e-4


def test_normalized_relu_proportional_to_tilted():
    c = compute_coefficients(get("relu"))
    f = normalize(get("relu"), c)
    x = np.linspace(-5, 5, 1001)
    np.testing.assert_allclose(f.value(x) * (c.gamma / 0.5) - (np.abs(x) - SQRT_2_PI), 0, atol=1e-8)


def test_unit_lipschitz_rescale_gives_tilted_relu():
    f = unit_lipschitz(normalized("relu"))
    x = np.linspace(-5, 5, 1000)
    np.testing.assert_allclose(f.value(x), get("tilted_relu").value(x), atol=1e-8)
    assert abs(lipschitz_constant(f) - 1) < 1e-12


def test_normalized_xtanh_at_zero():
    # x tanh x is even with positive mean, so the normalized unit is -beta/gamma at 0, not 0
    c = compute_coefficients(get("xtanh"))
    assert abs(c.alpha) < 1e-12
    assert abs(normalized("xtanh").value(0.0) + 0.605706 / 0.625308) < 1e-5


def test_diagnostics_of_tilted_relu():
    xi, eta = recompute_diagnostics(get("tilted_relu"))
    assert xi < 1e-10
    assert abs(eta - (1 - 2 / math.pi)) < 1e-12
    assert abs(eta - 0.3634) < 1e-4


@pytest.mark.parametrize("name", names())
def test_normalized_has_zero_bias_and_unit_variance(name):
    xi, eta = recompute_diagnostics(normalized(name))
    assert xi < 1e-8
    assert abs(eta - 1) < 1e-6


def test_normalized_relu_eta_exact():
    assert abs(recompute_diagnostics(normalized("relu"))[1] - 1) < 1e-8


@pytest.mark.parametrize("name", names())
def test_normalization_idempotent(name):
    once = normalized(name)
    c = compute_coefficients(once)
    assert abs(c.alpha) < 1e-8 and abs(c.beta) < 1e-8 and abs(c.gamma - 1) < 1e-8
    twice = normalize(once, c)
    x = np.linspace(-5, 5, 201)
    np.testing.assert_allclose(twice.value(x), once.value(x), atol=1e-8)


@pytest.mark.parametrize("name", names())
def test_normalized_hermite_low_orders_vanish(name):
    e = expand(normalized(name), 40)
    assert abs(e.coefficients[0]) < 1e-6 and abs(e.coefficients[1]) < 1e-6


@pytest.mark.parametrize("name", names())
def test_normalized_gradient_identity(name):
    a = get(name)
    c = compute_coefficients(a)
    f = normalize(a, c)
    x = np.random.default_rng(3).uniform(-5, 5, 200)
    x = x[np.abs(x) > 1e-3]
    np.testing.assert_allclose(f.derivative(x), (a.derivative(x) - c.alpha) / c.gamma, rtol=1e-12, atol=1e-15)
    h = 1e-6
    fd = (f.value(x + h) - f.value(x - h)) / (2 * h)
    assert np.max(np.abs(fd - f.derivative(x)) / np.maximum(np.abs(f.derivative(x)), 1e-3)) < 1e-6


def test_kinked_coefficients_carry_quadrature_discrepancies():
    c = compute_coefficients(get("relu"))
    assert c.discrepancies["alpha"] < 1e-12
    assert "beta" in c.flags  # Gauss-Hermite alone misses the kink by ~1e-3
    assert compute_coefficients(get("tanh")).flags == ()


def test_cache_is_thread_safe():
    ctx = NormalizationContext(sigma_w=0.77)
    with ThreadPoolExecutor(8) as pool:
        results = list(pool.map(lambda n: compute_coefficients(get(n), ctx), list(names()) * 4))
    for n, r in zip(list(names()) * 4, results):
        assert r == compute_coefficients(get(n), ctx)


def test_table_comparison_shape():
    rows = [compute_coefficients(get(n)) for n in PUBLISHED_TABLE]
    cmp = compare_to_published(rows)
    assert len(cmp) == 5 * len(PUBLISHED_TABLE)
    relu = {c.column: c for c in cmp if c.activation == "relu"}
    assert relu["alpha"].published == 0.5 and relu["beta"].published == 0.398942
