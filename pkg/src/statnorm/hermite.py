"""Probabilists' Hermite polynomials and Gaussian-orthonormal expansions.

Expansions use the normalised convention::

    f(x) = sum_n  f_n / sqrt(n!) * He_n(x),    f_n = E[f(z) He_n(z)] / sqrt(n!)

so that ``E[f(z)**2] = sum_n f_n**2`` (Parseval).
"""

import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateError, InvalidArgumentError
from .quadrature import DEFAULT_ORDER, integrate, rule_for

MAX_ORDER = 64
DEFAULT_TRUNCATION = 40


def hermite_poly(n, x):
    """He_n(x) from ``He_{n+1} = x He_n - n He_{n-1}``."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 0:
        raise InvalidArgumentError(f"order must be a nonnegative integer, got {n!r}")
    if n > MAX_ORDER:
        raise InvalidArgumentError(f"unsupported order {n}: at most {MAX_ORDER}")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        cur = prev
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return float(cur) if cur.ndim == 0 else cur


def normalized_table(n_max, x):
    """Array of shape ``(n_max + 1, len(x))`` holding He_n(x)/sqrt(n!)."""
    return kernels.hermite_table(n_max, x)


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    coefficients: np.ndarray
    truncation_order: int
    source_activation: str

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64)
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        if c.shape != (self.truncation_order + 1,):
            raise InvalidArgumentError("need exactly truncation_order + 1 coefficients")

    def __call__(self, x):
        return self.reconstruct(x)

    def reconstruct(self, x):
        x = np.asarray(x, dtype=np.float64)
        table = normalized_table(self.truncation_order, x.reshape(-1))
        out = self.coefficients @ table
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    @property
    def energy(self):
        return float(np.sum(self.coefficients ** 2))

    @property
    def tail_energy(self):
        """Sum of squared coefficients of order two and above."""
        return float(np.sum(self.coefficients[2:] ** 2))

    def to_csv(self):
        buf = io.StringIO()
        buf.write("n,f_n\n")
        for n, c in enumerate(self.coefficients):
            buf.write(f"{n},{c!r}\n")
        return buf.getvalue()


def _rule(a, K, rule):
    if rule is None:
        return rule_for(getattr(a, "kinks", ()), max(DEFAULT_ORDER, 2 * K))
    if rule.kind == "gauss-hermite" and rule.order < 2 * K:
        raise InvalidArgumentError(f"rule order {rule.order} too low for truncation {K}; need >= {2 * K}")
    return rule


def expand(a, K=DEFAULT_TRUNCATION, rule=None):
    """Hermite coefficients f_0..f_K of activation ``a``.

    Kinked activations default to the piecewise rule; a Gauss-Hermite rule
    passed explicitly must have order at least ``2*K``.
    """
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or not 0 <= K <= MAX_ORDER:
        raise InvalidArgumentError(f"truncation order must be an integer in [0, {MAX_ORDER}], got {K!r}")
    rule = _rule(a, K, rule)
    f = np.asarray(a(rule.nodes), dtype=np.float64)
    table = normalized_table(K, rule.nodes)
    coeffs = table @ (rule.weights * f)
    return HermiteExpansion(coeffs, int(K), getattr(a, "name", "anonymous"))


def project_to_H(e, tol=1e-12):
    """Zero the constant and linear coefficients and rescale the rest to unit energy."""
    c = np.array(e.coefficients)
    c[:2] = 0.0
    s = np.sqrt(np.sum(c ** 2))
    if s <= tol * max(1.0, np.sqrt(e.energy)):
        raise DegenerateError(f"{e.source_activation!r} has no Hermite content above order 1 (affine function)")
    return HermiteExpansion(c / s, e.truncation_order, e.source_activation)


def slope_estimates(a, rule=None):
    """First Hermite coefficient two ways: ``E[f(z) z]`` and ``E[f'(z)]`` (Stein's identity)."""
    rule = rule if rule is not None else rule_for(getattr(a, "kinks", ()))
    by_projection = integrate(rule, lambda z: a.value(z) * z)
    by_derivative = integrate(rule, a.derivative)
    return by_projection, by_derivative


def reconstruction_error(a, e, rule=None):
    """``E[(f - reconstruction)**2]`` under the Gaussian measure."""
    rule = rule if rule is not None else rule_for(getattr(a, "kinks", ()))
    return integrate(rule, lambda z: (a.value(z) - e.reconstruct(z)) ** 2)
