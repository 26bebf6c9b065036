import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate

from statnorm import get
from statnorm.errors import ConvergenceError, DegenerateError, InvalidArgumentError, NumericDomainError
from statnorm.spectral import (EmpiricalSpectrum, MomentSeries, catalan_moments, cauchy_transform,
                               empirical_spectrum, gram_spectrum, jacobi_eigenvalues, jacobian_s_transform,
                               ks_distance, m_transform_d2, m_transform_from_moments, moment_generating_function,
                               moments_from_s_transform, mp_cdf, mp_density, mp_moments, mp_quadratic_root,
                               nonlinearity_moments, point_mass_moments, s_transform_from_moments, series_revert,
                               series_compose, stieltjes_transform, wishart_sample)


def mp1_cdf_closed_form(x):
    t = np.arcsin(np.sqrt(np.clip(x, 0, 4)) / 2)
    return (2 / np.pi) * (t + np.sin(t) * np.cos(t))


# --- Marcenko-Pastur --------------------------------------------------------


def test_mp_support_and_value():
    d = mp_density(1.0)
    assert d.support == (0.0, 4.0)
    assert abs(d.density(1.0) - math.sqrt(3) / (2 * math.pi)) < 1e-15
    assert abs(d.density(1.0) - 0.2757) < 1e-4
    assert d.density(5.0) == 0 and d.density(-1.0) == 0


@pytest.mark.parametrize("phi", [1.0, 0.5, 0.1])
def test_mp_mass_and_moments(phi):
    d = mp_density(phi)
    assert abs(d.expect(np.ones_like) - 1) < 1e-6
    assert abs(d.expect(lambda x: x) - 1) < 1e-6
    np.testing.assert_allclose(d.moments(5).moments, mp_moments(phi, 5).moments, rtol=1e-10)


def test_mp_mass_by_independent_quadrature():
    d = mp_density(0.5)
    a, b = d.support
    mass, _ = sci_integrate.quad(d.density, a, b, limit=200)
    mean, _ = sci_integrate.quad(lambda x: x * d.density(x), a, b, limit=200)
    assert abs(mass - 1) < 1e-6 and abs(mean - 1) < 1e-6


def test_catalan_moments():
    np.testing.assert_array_equal(mp_moments(1.0, 6).moments, [1, 2, 5, 14, 42, 132])
    np.testing.assert_array_equal(catalan_moments(6).moments, [1, 2, 5, 14, 42, 132])


@pytest.mark.parametrize("phi", [0.0, 1.5, -0.2])
def test_mp_phi_range(phi):
    with pytest.raises(InvalidArgumentError):
        mp_density(phi)


def test_mp_cdf_matches_closed_form():
    x = np.linspace(-0.5, 4.5, 101)
    np.testing.assert_allclose(mp_cdf(1.0, x), mp1_cdf_closed_form(x), atol=1e-12)


def test_density_csv():
    lines = mp_density(1.0).to_csv(points=5).splitlines()
    assert lines[0] == "x,density" and len(lines) == 6


# --- empirical spectra --------------------------------------------------------


def test_identity_spectrum():
    s = empirical_spectrum(np.eye(8))
    np.testing.assert_array_equal(s.eigenvalues, np.ones(8))


def test_orthogonal_gram_spectrum(rng):
    q, _ = np.linalg.qr(rng.standard_normal((64, 64)))
    s = gram_spectrum(q)
    assert np.max(np.abs(s.eigenvalues - 1)) < 1e-8


def test_spectrum_sorted_descending(rng):
    a = rng.standard_normal((30, 30))
    s = empirical_spectrum(a @ a.T, {"layer": 3})
    assert np.all(np.diff(s.eigenvalues) <= 0)
    assert s.source == {"layer": 3}
    assert s.eigenvalues[-1] >= -1e-10


def test_lapack_matches_jacobi_oracle(rng):
    a = rng.standard_normal((24, 24))
    m = a + a.T
    np.testing.assert_allclose(empirical_spectrum(m).eigenvalues, jacobi_eigenvalues(m), rtol=1e-10, atol=1e-10)


def test_rejects_bad_matrices():
    with pytest.raises(NumericDomainError):
        empirical_spectrum(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InvalidArgumentError):
        empirical_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InvalidArgumentError):
        empirical_spectrum(np.ones((2, 3)))


def test_tiny_asymmetry_is_symmetrised():
    m = np.array([[2.0, 1.0], [1.0 + 1e-13, 2.0]])
    np.testing.assert_allclose(empirical_spectrum(m).eigenvalues, [3.0, 1.0], atol=1e-12)


def test_spectrum_summary_and_csv():
    s = EmpiricalSpectrum([3.0, 2.0, 1.0, 0.0], {"layer": 2, "epoch": 5})
    summ = s.summary()
    assert summ["layer"] == 2 and summ["n"] == 4 and summ["max"] == 3.0
    assert abs(summ["std"] - np.std([3, 2, 1, 0])) < 1e-15
    assert s.to_csv().splitlines()[:2] == ["rank,eigenvalue", "0,3.0"]


def test_wishart_ks_at_512():
    s = empirical_spectrum(wishart_sample(512, np.random.default_rng(0)))
    assert ks_distance(s, lambda x: mp_cdf(1.0, x)) < 0.05


def test_ks_distance_decreases_with_size():
    medians = []
    for n in (128, 256, 512):
        ks = [ks_distance(empirical_spectrum(wishart_sample(n, np.random.default_rng(seed))), mp1_cdf_closed_form)
              for seed in range(5)]
        medians.append(np.median(ks))
    assert medians[0] > medians[1] > medians[2], medians


def test_ks_distance_oracle():
    # uniform grid of the inverse CDF gives the minimal possible distance 1/n
    s = EmpiricalSpectrum(np.linspace(1, 0, 11)[::1])
    assert abs(ks_distance(s, lambda x: np.clip(x, 0, 1)) - 1 / 11) < 1e-3


# --- transforms ------------------------------------------------------------------


def test_stieltjes_mp_at_minus_one():
    g = stieltjes_transform(mp_density(1.0), -1.0)
    assert abs(g - (math.sqrt(5) - 1) / 2) < 1e-6
    assert abs(g - 0.618) < 1e-3
    direct, _ = sci_integrate.quad(lambda x: mp_density(1.0).density(x) / (x + 1), 0, 4, limit=200)
    assert abs(g.real - direct) < 1e-6


def test_stieltjes_sign_convention():
    for d in (mp_density(1.0), mp_density(0.3)):
        for y in (1e4, 1e6):
            z = 1j * y
            assert abs(stieltjes_transform(d, z) * z + 1) < 1e-3
    assert cauchy_transform(mp_density(1.0), 1e6j) * 1e6j == pytest.approx(1.0, abs=1e-3)


def test_stieltjes_point_mass():
    assert stieltjes_transform(empirical_spectrum(np.eye(3)), 3.0) == pytest.approx(-0.5)


def test_stieltjes_on_support_rejected():
    with pytest.raises(NumericDomainError):
        stieltjes_transform(mp_density(1.0), 2.0)


def test_quadratic_identity_at_twenty_points():
    d = mp_density(1.0)
    pts = [-3.0, -1.0, -0.25, 0.1, 0.2, 0.24, 0.1 + 0.3j, -0.5 + 2j, 3j, -3j, 1 + 1j, 2 - 0.5j, 5 + 1j,
           0.3 + 0.2j, -10.0, -0.01, 0.05j, 0.25 + 0.1j, 10 - 10j, -2 - 2j]
    assert len(pts) == 20
    for z in pts:
        g = moment_generating_function(d, z)
        assert abs(z * g * g - g + 1) < 1e-6, z
        assert abs(g - mp_quadratic_root(z)) < 1e-6, z


def test_large_z_expansion_recovers_moments():
    d = mp_density(1.0)
    z = 200.0
    g = stieltjes_transform(d, z).real
    # -z G(z) = 1 + m1/z + m2/z^2 + ...
    m1 = (-z * g - 1) * z
    assert abs(m1 - 1) < 2e-2
    # Richardson on two radii removes the m2 contamination
    def resid(z):
        return (-z * stieltjes_transform(d, z).real - 1) * z
    m1_r = 2 * resid(400.0) - resid(200.0)
    assert abs(m1_r - 1) < 1e-3
    m2 = ((-z * g - 1) * z - 1) * z
    m2_r = 2 * (((-400.0 * stieltjes_transform(d, 400.0).real - 1) * 400.0 - 1) * 400.0) - m2
    assert abs(m2_r - 2) < 1e-1
    mgf = moment_generating_function(d, 1e-3)
    assert abs((mgf.real - 1) / 1e-3 - 1) < 3e-3


# --- moment series ---------------------------------------------------------------


def test_relu_nonlinearity_moments():
    mu = nonlinearity_moments(get("relu"), 1.0, 8)
    np.testing.assert_allclose(mu.moments, 0.5, atol=1e-14)
    assert mu.kind == "nonlinearity-moment"


def test_tanh_nonlinearity_moments():
    mu = nonlinearity_moments(get("tanh"), 1.0, 2).moments
    assert abs(mu[0] - 0.4644) < 1e-4 and abs(mu[0] ** 2 - 0.21567) < 1e-5
    assert abs(mu[1] - 0.341509) < 1e-6


def test_tilted_relu_nonlinearity_moments():
    np.testing.assert_allclose(nonlinearity_moments(get("tilted_relu"), 2.0, 16).moments, 1.0, atol=1e-14)


@pytest.mark.parametrize("name", ["tanh", "sigmoid", "relu", "swish"])
def test_bounded_derivative_moment_bound(name):
    a = get(name)
    sup = np.max(np.abs(a.derivative(np.linspace(-40, 40, 200001)))) ** 2
    mu = nonlinearity_moments(a, 1.0, 8).moments
    assert np.all(mu <= sup ** np.arange(1, 9) * (1 + 1e-12))


def test_nonlinearity_moment_order_guard():
    with pytest.raises(InvalidArgumentError):
        nonlinearity_moments(get("tanh"), 1.0, 17)


def test_hankel_positivity():
    assert catalan_moments(4).hankel_psd()
    assert nonlinearity_moments(get("gelu"), 1.0, 4).hankel_psd()
    assert not MomentSeries([1.0, 0.5]).hankel_psd()


def test_m_transform_examples():
    assert m_transform_from_moments(MomentSeries(np.zeros(5)), 3.0) == 0
    geometric = (0.4 / 0.6) * (1 - 0.4 ** 16)
    assert abs(m_transform_from_moments(point_mass_moments(1.0, 16), 2.5) - geometric) < 1e-15
    relu = nonlinearity_moments(get("relu"), 1.0, 16)
    assert abs(m_transform_from_moments(relu, 2.5) - 0.5 * geometric) < 1e-12


def test_m_transform_guard():
    with pytest.raises(ConvergenceError):
        m_transform_from_moments(point_mass_moments(3.0, 8), 5.0)


def test_m_transform_d2_direct_vs_series():
    a = get("tanh")
    mu = nonlinearity_moments(a, 1.0, 16)
    for z in (4.0, 3 + 2j, -5.0):
        assert abs(m_transform_d2(a, z) - m_transform_from_moments(mu, z)) < 1e-7


def test_m_transform_d2_closed_form_for_relu():
    # f'^2 in {0, 1} with probability 1/2 each
    z = 0.3 + 1j
    assert abs(m_transform_d2(get("relu"), z) - 0.5 / (z - 1)) < 1e-14


# --- S-transform -----------------------------------------------------------------


@pytest.mark.parametrize("c", [0.5, 1.0, 2.5])
def test_point_mass_s_transform(c):
    s = s_transform_from_moments(point_mass_moments(c, 8), 8)
    assert abs(s[0] - 1 / c) < 1e-10
    np.testing.assert_allclose(s[1:], 0, atol=1e-10)


def test_mp_s_transform_is_one_over_one_plus_z():
    s = s_transform_from_moments(catalan_moments(8), 8)
    np.testing.assert_allclose(s, [(-1) ** k for k in range(8)], atol=1e-10)


def test_product_rule_on_scaled_mp():
    c = 1.7
    lhs = s_transform_from_moments(catalan_moments(4), 4) * s_transform_from_moments(point_mass_moments(c, 4), 4)[0]
    from statnorm.spectral import s_transform_product
    prod = s_transform_product(s_transform_from_moments(catalan_moments(4), 4),
                               s_transform_from_moments(point_mass_moments(c, 4), 4))
    rhs = s_transform_from_moments(catalan_moments(4).scaled(c), 4)
    np.testing.assert_allclose(prod, rhs, atol=1e-8)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_s_transform_errors():
    with pytest.raises(DegenerateError):
        s_transform_from_moments(MomentSeries([0.0, 1.0, 2.0]), 3)
    with pytest.raises(InvalidArgumentError):
        s_transform_from_moments(catalan_moments(12), 9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=4), st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4))
def test_round_trip_on_discrete_laws(atoms, probs):
    n = min(len(atoms), len(probs))
    x = np.array(atoms[:n])
    p = np.array(probs[:n]) / np.sum(probs[:n])
    ms = MomentSeries([np.dot(p, x ** k) for k in range(1, 9)])
    back = moments_from_s_transform(s_transform_from_moments(ms, 8), 8)
    np.testing.assert_allclose(back.moments, ms.moments, rtol=1e-8, atol=1e-8)


def test_series_revert_against_log():
    # inverse of exp(y) - 1 is log(1 + y)
    f = np.array([0.0] + [1 / math.factorial(k) for k in range(1, 9)])
    g = series_revert(f, 9)
    np.testing.assert_allclose(g[1:], [(-1) ** (k + 1) / k for k in range(1, 9)], atol=1e-13)
    np.testing.assert_allclose(series_compose(f, g, 9), [0, 1] + [0] * 7, atol=1e-13)


def test_jacobian_s_transform_isometric_network():
    s_d = s_transform_from_moments(nonlinearity_moments(get("tilted_relu"), 1.0, 8), 8)
    s_w = s_transform_from_moments(point_mass_moments(1.0, 8), 8)
    s_j = jacobian_s_transform(s_d, s_w, depth=10)
    np.testing.assert_allclose(moments_from_s_transform(s_j).moments, 1.0, atol=1e-9)


def test_jacobian_s_transform_relu_first_moment():
    # first moment of J J^T is the product of first moments: (1/2)^L for relu with orthogonal weights
    s_d = s_transform_from_moments(nonlinearity_moments(get("relu"), 1.0, 4), 4)
    s_w = s_transform_from_moments(point_mass_moments(1.0, 4), 4)
    m = moments_from_s_transform(jacobian_s_transform(s_d, s_w, 3)).moments
    assert abs(m[0] - 0.125) < 1e-12
