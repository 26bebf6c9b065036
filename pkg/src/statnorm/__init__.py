"""Static activation normalization and the random-matrix tools around it."""

from .activations import Activation, get, make_activation, names
from .kernels import BACKEND
from .normalizer import NormalizationContext, NormalizationCoefficients, compute_coefficients, normalize
from .quadrature import QuadratureRule, build_rule, integrate

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "BACKEND",
    "NormalizationCoefficients",
    "NormalizationContext",
    "QuadratureRule",
    "build_rule",
    "compute_coefficients",
    "get",
    "integrate",
    "make_activation",
    "names",
    "normalize",
]
