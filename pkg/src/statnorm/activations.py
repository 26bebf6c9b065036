"""Registry of activation functions with analytic derivatives.

Every activation is an affine correction of a base nonlinearity::

    value(x)      = (base(x) - slope * x - shift) / scale
    derivative(x) = (base'(x) - slope) / scale

Registry members run on the elementwise kernels in :mod:`statnorm.kernels`.
Activations built from arbitrary Python callables via :func:`make_activation`
use the same affine wrapper but evaluate their callables directly.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericDomainError, UnknownActivationError

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class Activation:
    name: str
    base: str
    slope: float = 0.0
    shift: float = 0.0
    scale: float = 1.0
    kinks: tuple = ()
    lipschitz_hint: float | None = None
    base_value: object = field(default=None, repr=False, compare=False)
    base_derivative: object = field(default=None, repr=False, compare=False)

    @property
    def is_kernel(self):
        return self.base in kernels.CODES

    @property
    def is_affine_corrected(self):
        return self.slope != 0.0 or self.shift != 0.0 or self.scale != 1.0

    def forward(self, x, want_value=True, want_deriv=True):
        """Return ``(value, derivative)`` arrays in one pass; either may be skipped."""
        if self.is_kernel:
            return kernels.activation_forward(kernels.CODES[self.base], x, self.slope, self.shift,
                                              self.scale, want_value, want_deriv)
        arr = np.asarray(x, dtype=np.float64)
        f = df = None
        if want_value:
            f = (np.asarray(self.base_value(arr), dtype=np.float64) - self.slope * arr - self.shift) / self.scale
        if want_deriv:
            df = (np.asarray(self.base_derivative(arr), dtype=np.float64) - self.slope) / self.scale
        return f, df

    def value(self, x):
        f, _ = self.forward(x, want_deriv=False)
        return float(f) if np.ndim(x) == 0 else f

    def derivative(self, x):
        _, df = self.forward(x, want_value=False)
        return float(df) if np.ndim(x) == 0 else df

    def __call__(self, x):
        return self.value(x)

    def affine(self, slope, shift, scale, name=None):
        """Compose a further ``(f - slope*x - shift)/scale`` correction on top of this one."""
        if not scale > 0:
            raise InvalidArgumentError(f"scale must be positive, got {scale}")
        return replace(
            self,
            name=name or self.name,
            slope=self.slope + slope * self.scale,
            shift=self.shift + shift * self.scale,
            scale=self.scale * scale,
            lipschitz_hint=None,
        )


def make_activation(name, value, derivative, kinks=(), lipschitz_hint=None):
    """Wrap vectorised callables ``value`` and ``derivative`` as an :class:`Activation`."""
    return Activation(name=name, base="callable", kinks=tuple(kinks), lipschitz_hint=lipschitz_hint,
                      base_value=value, base_derivative=derivative)


_REGISTRY = {
    "relu": Activation("relu", "relu", kinks=(0.0,), lipschitz_hint=1.0),
    "softplus": Activation("softplus", "softplus", lipschitz_hint=1.0),
    "sigmoid": Activation("sigmoid", "sigmoid", lipschitz_hint=0.25),
    "tanh": Activation("tanh", "tanh", lipschitz_hint=1.0),
    "gelu": Activation("gelu", "gelu", lipschitz_hint=1.13),
    "swish": Activation("swish", "swish", lipschitz_hint=1.1),
    "elu": Activation("elu", "elu", kinks=(0.0,), lipschitz_hint=1.0),
    "xtanh": Activation("xtanh", "xtanh"),
    "tilted_relu": Activation("tilted_relu", "abs", shift=SQRT_2_OVER_PI, kinks=(0.0,), lipschitz_hint=1.0),
    "abs": Activation("abs", "abs", kinks=(0.0,), lipschitz_hint=1.0),
}

# rows of the published coefficient table, in order
TABLE_ACTIVATIONS = ("relu", "softplus", "sigmoid", "tanh", "gelu", "swish", "elu", "xtanh")


def names():
    return tuple(_REGISTRY)


def get(name):
    try:
        return _REGISTRY[name]
    except (KeyError, TypeError):
        raise UnknownActivationError(name, names()) from None


def evaluate_elementwise(a, v):
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        i = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise NumericDomainError(f"input component {i} is not finite ({arr.ravel()[i]})")
    return a.forward(arr, want_deriv=False)[0]
