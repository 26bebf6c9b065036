"""Static normalization coefficients and the normalized activation.

For an activation ``f`` and argument scale ``s = sigma_w * sigma_x`` the
coefficients are Gaussian means over ``z ~ N(0, 1)``::

    alpha = E[f'(s z)]                     slope removed
    beta  = E[f(s z)]                      mean removed
    gamma = sqrt(E[(f(s z) - alpha s z - beta)**2])

and the normalized activation is ``(f(x) - alpha x - beta) / gamma``.  Its
derivative ``(f'(x) - alpha) / gamma`` is a fixed centering and scaling of
the backpropagated gradient.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .activations import TABLE_ACTIVATIONS, Activation, get
from .errors import DegenerateError, InvalidArgumentError
from .quadrature import AGREEMENT_TOL, build_rule, integrate, rule_for

# Reference table as printed: columns are (mean, slope, gamma, m2**2, m4), i.e.
# the first two columns are exchanged relative to the (alpha, beta) naming.
PUBLISHED_TABLE = {
    "relu": (0.398942, 0.5, 0.301405, 0.25, 0.5),
    "softplus": (0.806059, 0.5, 0.146678, 0.0680713, 0.131594),
    "sigmoid": (0.5, 0.206621, 0.0262071, 0.0680713, 0.131594),
    "tanh": (0, 0.605706, 0.165576, 0.21567, 0.341509),
    "gelu": (0.325735, 0.5, 0.323942, 0.239622, 0.497433),
    "swish": (0.206621, 0.5, 0.251164, 0.144007, 0.286581),
    "elu": (0.160521, 0.761578, 0.197932, 0.44636, 0.594411),
    "xtanh": (0.605706, 0, 0.625308, 0.749437, 1.01452),
}
TABLE_COLUMNS = ("alpha", "beta", "gamma", "m2_squared", "m4")


@dataclass(frozen=True)
class NormalizationContext:
    sigma_w: float = 1.0
    sigma_x: float = 1.0
    q_star: float | None = None

    def __post_init__(self):
        if self.q_star is None:
            object.__setattr__(self, "q_star", self.sigma_w ** 2 * self.sigma_x ** 2)
        for name in ("sigma_w", "sigma_x", "q_star"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def scale(self):
        return self.sigma_w * self.sigma_x

    def key(self):
        return (float(self.sigma_w), float(self.sigma_x), float(self.q_star))


@dataclass(frozen=True)
class NormalizationCoefficients:
    activation: str
    alpha: float
    beta: float
    gamma: float
    xi: float
    eta: float
    m2: float
    m4: float
    context: NormalizationContext = field(default_factory=NormalizationContext)
    rule_kind: str = "gauss-hermite"
    # |Gauss-Hermite - piecewise| per coefficient; only filled for kinked activations
    discrepancies: dict = field(default_factory=dict, compare=False)

    @property
    def m2_squared(self):
        return self.m2 ** 2

    @property
    def flags(self):
        return tuple(sorted(k for k, v in self.discrepancies.items() if v > AGREEMENT_TOL))

    def row(self):
        return (self.alpha, self.beta, self.gamma, self.m2_squared, self.m4)


_cache = {}
_cache_lock = threading.Lock()


def _cache_key(a, ctx):
    return (a.name, a.base, a.slope, a.shift, a.scale, id(a.base_value), id(a.base_derivative), ctx.key())


def _moments(a, s, rule):
    f = lambda z: a.value(s * z)
    df = lambda z: a.derivative(s * z)
    alpha = integrate(rule, df)
    beta = integrate(rule, f)
    eta = integrate(rule, lambda z: f(z) ** 2)
    gamma_sq = integrate(rule, lambda z: (f(z) - alpha * s * z - beta) ** 2)
    m2 = integrate(rule, lambda z: df(z) ** 2)
    m4 = integrate(rule, lambda z: df(z) ** 4)
    return {"alpha": alpha, "beta": beta, "eta": eta, "gamma_sq": gamma_sq, "m2": m2, "m4": m4}


def compute_coefficients(a, ctx=None, rule=None):
    """Normalization coefficients and diagnostics of ``a`` under ``ctx``.

    Without an explicit rule, kinked activations are integrated with the
    piecewise rule and additionally checked against Gauss-Hermite; the
    per-coefficient gaps land in ``discrepancies``.  Results for default
    rules are cached per (activation, context).
    """
    ctx = ctx or NormalizationContext()
    if isinstance(a, str):
        a = get(a)
    key = _cache_key(a, ctx) if rule is None else None
    if key is not None:
        with _cache_lock:
            hit = _cache.get(key)
        if hit is not None:
            return hit

    s = ctx.scale
    breakpoints = tuple(k / s for k in a.kinks)
    use = rule if rule is not None else rule_for(breakpoints)
    m = _moments(a, s, use)
    discrepancies = {}
    if rule is None and breakpoints:
        gh = _moments(a, s, build_rule())
        discrepancies = {k: abs(gh[k] - m[k]) for k in m}
    gamma_sq = max(m["gamma_sq"], 0.0)
    gamma = math.sqrt(gamma_sq)
    if gamma < 1e-10:
        raise DegenerateError(f"{a.name!r} is affine under the Gaussian measure (gamma={gamma:.3g})")
    out = NormalizationCoefficients(
        activation=a.name,
        alpha=m["alpha"],
        beta=m["beta"],
        gamma=gamma,
        xi=m["alpha"] ** 2,
        eta=m["eta"],
        m2=m["m2"],
        m4=m["m4"],
        context=ctx,
        rule_kind=use.kind,
        discrepancies=discrepancies,
    )
    if key is not None:
        with _cache_lock:
            _cache.setdefault(key, out)
    return out


def normalized_name(name):
    return f"{name}_H"


def normalize(a, c):
    """Return ``(f(x) - alpha x - beta) / gamma`` as a new :class:`Activation`."""
    if not isinstance(a, Activation):
        raise InvalidArgumentError(f"expected an Activation, got {type(a).__name__}")
    if c.activation != a.name:
        raise InvalidArgumentError(f"coefficients were computed for {c.activation!r}, not {a.name!r}")
    if not c.gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    return a.affine(c.alpha, c.beta, c.gamma, name=normalized_name(a.name))


def normalized(name, ctx=None):
    """Shortcut: the normalized registry activation ``name``."""
    a = get(name) if isinstance(name, str) else name
    return normalize(a, compute_coefficients(a, ctx))


def recompute_diagnostics(a_H, rule=None):
    """``(xi, eta)`` of an activation at unit scale."""
    rule = rule if rule is not None else rule_for(a_H.kinks)
    slope = integrate(rule, a_H.derivative)
    eta = integrate(rule, lambda z: a_H.value(z) ** 2)
    return slope ** 2, eta


def lipschitz_constant(a, bound=10.0, points=20001):
    """Grid estimate of ``sup |f'|`` on ``[-bound, bound]``."""
    x = np.linspace(-bound, bound, points)
    return float(np.max(np.abs(a.derivative(x))))


def unit_lipschitz(a, name=None):
    """Rescale ``a`` so that its derivative magnitude peaks at 1."""
    lip = lipschitz_constant(a)
    if lip == 0:
        raise DegenerateError(f"{a.name!r} is constant")
    out = a.affine(0.0, 0.0, lip, name=name or a.name)
    return out


def coefficient_table(names=TABLE_ACTIVATIONS, ctx=None):
    return [compute_coefficients(get(n), ctx) for n in names]


@dataclass(frozen=True)
class TableComparison:
    activation: str
    column: str
    computed: float
    published: float

    @property
    def error(self):
        return abs(self.computed - self.published)


def compare_to_published(coefficients):
    """Cell-by-cell comparison with :data:`PUBLISHED_TABLE`, first two columns exchanged."""
    out = []
    for c in coefficients:
        ref = PUBLISHED_TABLE.get(c.activation)
        if ref is None:
            continue
        mean_col, slope_col, *rest = ref
        for col, computed, published in zip(TABLE_COLUMNS, c.row(), (slope_col, mean_col, *rest)):
            out.append(TableComparison(c.activation, col, computed, float(published)))
    return out
