"""Random-matrix spectral tools.

Densities, empirical spectra, the Stieltjes transform, moment series and
their M- and S-transforms.  Transform conventions:

* ``stieltjes_transform(d, z) = E[1 / (lambda - z)]``, so ``z G(z) -> -1``;
* ``cauchy_transform(d, z) = E[1 / (z - lambda)] = -stieltjes_transform``,
  the resolvent-trace form ``-E tr (X - z)^-1 / N``;
* ``moment_generating_function(d, z) = E[1 / (1 - z lambda)] = sum m_k z^k``.
  For the square Marcenko-Pastur law it solves ``z g**2 - g + 1 = 0``.

M- and S-transforms act on truncated moment series.  With
``psi(w) = sum_k m_k w**k`` and ``M(z) = psi(1/z)`` one has
``S(y) = (1 + y) * psi^{-1}(y) / y``, which is how the S-transform
coefficients are obtained (series reversion, no root finding).
"""

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DegenerateError, InvalidArgumentError, NumericDomainError
from .quadrature import gauss_legendre, rule_for

MAX_NONLINEARITY_ORDER = 16
MAX_S_ORDER = 8


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Density on a closed interval.

    ``nodes(n)`` returns abscissae and weights such that
    ``sum(w * g(x)) ~= integral of g * density``; the default is
    Gauss-Legendre on the support, and Marcenko-Pastur laws override it with
    a change of variables that removes the edge singularities.
    """

    support: tuple
    density: object
    name: str
    node_fn: object = field(default=None, repr=False)

    def nodes(self, n=2000):
        if self.node_fn is not None:
            return self.node_fn(n)
        a, b = self.support
        x, w = gauss_legendre(n)
        x = 0.5 * (b - a) * x + 0.5 * (a + b)
        return x, 0.5 * (b - a) * w * self.density(x)

    def expect(self, g, n=2000):
        x, w = self.nodes(n)
        return np.dot(w, g(x))

    def moments(self, K, n=2000):
        x, w = self.nodes(n)
        return MomentSeries(np.array([np.dot(w, x ** k) for k in range(1, K + 1)]), "matrix-moment")

    def to_csv(self, points=401):
        a, b = self.support
        x = np.linspace(a, b, points)
        buf = io.StringIO()
        buf.write("x,density\n")
        for xi, yi in zip(x, self.density(x)):
            buf.write(f"{float(xi)!r},{float(yi)!r}\n")
        return buf.getvalue()


def _check_phi(phi):
    if not (isinstance(phi, (int, float)) and 0 < phi <= 1):
        raise InvalidArgumentError(f"shape parameter must lie in (0, 1], got {phi!r}")


def mp_edges(phi):
    r = math.sqrt(phi)
    return (1 - r) ** 2, (1 + r) ** 2


def mp_density(phi=1.0):
    """Marcenko-Pastur law with ratio ``phi``, unit variance."""
    _check_phi(phi)
    a, b = mp_edges(phi)

    def density(x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x > a) & (x < b) & (x > 0)
        xs = np.where(inside, x, 1.0)
        out = np.sqrt(np.clip((b - xs) * (xs - a), 0.0, None)) / (2 * np.pi * phi * xs)
        return np.where(inside, out, 0.0)

    def node_fn(n):
        # x = a + (b - a) sin^2(t): the sqrt edge behaviour becomes sin*cos and cancels
        t, wt = gauss_legendre(n)
        t = 0.25 * np.pi * (t + 1)
        wt = 0.25 * np.pi * wt
        s, c = np.sin(t), np.cos(t)
        x = a + (b - a) * s * s
        w = wt * 2 * (b - a) ** 2 * (s * c) ** 2 / (2 * np.pi * phi * x)
        return x, w

    return SpectralDensity((a, b), density, f"marcenko-pastur({phi:g})", node_fn)


def mp_cdf(phi, x, n=400):
    """CDF of the Marcenko-Pastur law, by quadrature of the density on ``[a, x]``."""
    _check_phi(phi)
    a, b = mp_edges(phi)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(x)
    t, wt = gauss_legendre(n)
    for i, xi in enumerate(x):
        if xi <= a:
            out[i] = 0.0
        elif xi >= b:
            out[i] = 1.0
        else:
            top = math.asin(math.sqrt((xi - a) / (b - a)))
            th = 0.5 * top * (t + 1)
            s, c = np.sin(th), np.cos(th)
            lam = a + (b - a) * s * s
            out[i] = 0.5 * top * np.dot(wt, 2 * (b - a) ** 2 * (s * c) ** 2 / (2 * np.pi * phi * lam))
    return out


def mp_moments(phi, K):
    """Closed-form moments (Narayana polynomials) of the Marcenko-Pastur law."""
    _check_phi(phi)
    m = [sum(phi ** j / (j + 1) * math.comb(k, j) * math.comb(k - 1, j) for j in range(k)) for k in range(1, K + 1)]
    return MomentSeries(np.array(m, dtype=np.float64), "matrix-moment")


# ---------------------------------------------------------------------------
# empirical spectra


@dataclass(frozen=True, eq=False)
class EmpiricalSpectrum:
    eigenvalues: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=np.float64)
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return self.eigenvalues.shape[0]

    @property
    def std(self):
        return float(np.std(self.eigenvalues))

    @property
    def iqr(self):
        q75, q25 = np.percentile(self.eigenvalues, [75, 25])
        return float(q75 - q25)

    def summary(self):
        ev = self.eigenvalues
        return {
            **self.source,
            "n": int(ev.shape[0]),
            "max": float(ev[0]),
            "min": float(ev[-1]),
            "mean": float(np.mean(ev)),
            "std": self.std,
            "iqr": self.iqr,
        }

    def cdf(self, x):
        asc = self.eigenvalues[::-1]
        return np.searchsorted(asc, np.asarray(x), side="right") / asc.shape[0]

    def moments(self, K):
        ev = self.eigenvalues
        return MomentSeries(np.array([np.mean(ev ** k) for k in range(1, K + 1)]), "matrix-moment")

    def to_csv(self):
        buf = io.StringIO()
        buf.write("rank,eigenvalue\n")
        for i, v in enumerate(self.eigenvalues):
            buf.write(f"{i},{float(v)!r}\n")
        return buf.getvalue()


def empirical_spectrum(M, source=None, tol=1e-10):
    """Eigenvalues of a symmetric matrix, sorted descending.

    Asymmetry above ``tol`` (relative to the largest entry) is rejected;
    anything smaller is removed by symmetrising.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericDomainError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.T)) > tol * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))[::-1]
    return EmpiricalSpectrum(ev, dict(source or {}))


def gram_spectrum(W, source=None):
    """Spectrum of ``W @ W.T``."""
    W = np.asarray(W, dtype=np.float64)
    return empirical_spectrum(W @ W.T, source)


def jacobi_eigenvalues(M, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations; slow, used as an independent check on LAPACK."""
    A = np.array(M, dtype=np.float64)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A ** 2) - np.sum(np.diag(A) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rp, rq = A[p].copy(), A[q].copy()
                A[p], A[q] = c * rp - s * rq, s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * cp - s * cq, s * cp + c * cq
    else:
        raise ConvergenceError("Jacobi sweeps did not converge")
    return np.sort(np.diag(A))[::-1]


def ks_distance(spectrum, cdf):
    """Kolmogorov-Smirnov distance between an empirical spectrum and a CDF callable."""
    x = np.sort(np.asarray(spectrum.eigenvalues))
    n = x.shape[0]
    F = np.asarray(cdf(x), dtype=np.float64)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def wishart_sample(n, rng, phi=1.0):
    """``X X^T`` with ``X`` of shape ``(n, n/phi)`` and iid N(0, 1/(n/phi)) entries."""
    m = int(round(n / phi))
    X = rng.standard_normal((n, m)) / math.sqrt(m)
    return X @ X.T


# ---------------------------------------------------------------------------
# transforms of densities


def _on_support(d, z):
    a, b = d.support
    return abs(z.imag) == 0 and a <= z.real <= b


def stieltjes_transform(d, z, n=2000):
    """``E[1 / (lambda - z)]`` for a density or an empirical spectrum (atoms)."""
    z = complex(z)
    if isinstance(d, EmpiricalSpectrum):
        ev = d.eigenvalues
        if z.imag == 0 and np.any(ev == z.real):
            raise NumericDomainError(f"z={z} coincides with an eigenvalue")
        return complex(np.mean(1.0 / (ev - z)))
    if _on_support(d, z):
        raise NumericDomainError(f"z={z} lies on the support {d.support}")
    x, w = d.nodes(n)
    return complex(np.dot(w, 1.0 / (x - z)))


def cauchy_transform(d, z, n=2000):
    """``-E tr (X - z)^-1 / N``, the resolvent-trace sign convention."""
    return -stieltjes_transform(d, z, n)


def moment_generating_function(d, z, n=2000):
    """``E[1 / (1 - z lambda)] = sum_k m_k z**k`` (with ``m_0 = 1``)."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    return -stieltjes_transform(d, 1.0 / z, n) / z


def mp_quadratic_root(z):
    """Root of ``z g**2 - g + 1 = 0`` that is analytic at 0 with ``g(0) = 1``."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    # (1 - sqrt(1 - 4z)) / (2z) rewritten to avoid cancellation
    return 2.0 / (1.0 + np.sqrt(1 - 4 * z))


# ---------------------------------------------------------------------------
# moment series


@dataclass(frozen=True, eq=False)
class MomentSeries:
    moments: np.ndarray
    kind: str = "matrix-moment"

    def __post_init__(self):
        if self.kind not in ("matrix-moment", "nonlinearity-moment"):
            raise InvalidArgumentError(f"unknown moment kind {self.kind!r}")
        m = np.array(self.moments, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "moments", m)

    def __len__(self):
        return self.moments.shape[0]

    def scaled(self, c):
        """Moments of the law of ``c * lambda``."""
        k = np.arange(1, len(self) + 1)
        return MomentSeries(self.moments * c ** k, self.kind)

    def hankel_psd(self):
        if len(self) < 2:
            return True
        m1, m2 = self.moments[:2]
        return m2 - m1 * m1 >= -1e-12


def point_mass_moments(c, K):
    return MomentSeries(np.full(K, float(c)) ** np.arange(1, K + 1), "matrix-moment")


def nonlinearity_moments(a, q_star=1.0, K=8, rule=None):
    """``mu_k = E[f'(sqrt(q*) h)**(2k)]`` for k = 1..K, h standard normal."""
    if not 1 <= K <= MAX_NONLINEARITY_ORDER:
        raise InvalidArgumentError(f"order must lie in [1, {MAX_NONLINEARITY_ORDER}], got {K}")
    if not q_star > 0:
        raise InvalidArgumentError(f"q_star must be positive, got {q_star}")
    s = math.sqrt(q_star)
    rule = rule if rule is not None else rule_for(tuple(k / s for k in a.kinks))
    d2 = a.derivative(s * rule.nodes) ** 2
    mu = []
    for k in range(1, K + 1):
        vals = d2 ** k
        if not np.all(np.isfinite(vals)):
            raise NumericDomainError(f"f'^{2 * k} is not finite on the quadrature nodes")
        mu.append(float(np.dot(rule.weights, vals)))
    return MomentSeries(np.array(mu), "nonlinearity-moment")


def _radius(ms):
    k = np.arange(1, len(ms) + 1)
    growth = np.abs(ms.moments) ** (1.0 / k)
    return max(1.0, float(growth.max()) if len(ms) else 1.0)


def m_transform_from_moments(ms, z):
    """Truncated ``M(z) = sum_k m_k / z**k``.

    Requires ``|z| > 2 * max(1, max_k |m_k|**(1/k))`` so the dropped tail is small.
    """
    z = complex(z)
    guard = 2.0 * _radius(ms)
    if not abs(z) > guard:
        raise ConvergenceError(f"|z|={abs(z):.4g} must exceed {guard:.4g} for the truncated series")
    k = np.arange(1, len(ms) + 1)
    out = complex(np.sum(ms.moments / z ** k))
    return out.real if z.imag == 0 else out


def m_transform_d2(a, z, q_star=1.0, rule=None):
    """``E[f'(sqrt(q*) h)**2 / (z - f'(sqrt(q*) h)**2)]`` by direct quadrature."""
    z = complex(z)
    s = math.sqrt(q_star)
    rule = rule if rule is not None else rule_for(tuple(k / s for k in a.kinks))
    d2 = a.derivative(s * rule.nodes) ** 2
    denom = z - d2
    if np.any(denom == 0):
        raise NumericDomainError(f"z={z} hits the range of f'^2")
    return complex(np.dot(rule.weights, d2 / denom))


# power series helpers; arrays hold coefficients of y**0 .. y**(n-1)


def series_mul(a, b, n):
    return np.convolve(a[:n], b[:n])[:n]


def series_compose(outer, inner, n):
    """``outer(inner(y))`` truncated to ``n`` terms; ``inner`` must have no constant term."""
    if inner[0] != 0:
        raise InvalidArgumentError("inner series must vanish at 0")
    out = np.zeros(n)
    for c in outer[:n][::-1]:
        out = series_mul(out, inner, n)
        out[0] += c
    return out


def series_revert(f, n):
    """Compositional inverse of ``f`` (no constant term, nonzero linear term) to ``n`` terms."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] < n:
        f = np.concatenate([f, np.zeros(n - f.shape[0])])
    if f[0] != 0:
        raise InvalidArgumentError("series to revert must vanish at 0")
    if f[1] == 0:
        raise DegenerateError("series to revert has zero linear coefficient")
    g = np.zeros(n)
    g[1] = 1.0 / f[1]
    for k in range(2, n):
        residual = series_compose(f, g, k + 1)[k]
        g[k] = -residual / f[1]
    return g


def s_transform_from_moments(ms, K=None):
    """Taylor coefficients ``s_0 .. s_{K-1}`` of the S-transform at 0.

    Uses the moments ``m_1 .. m_K``; ``K`` defaults to ``min(len(ms), 8)``.
    """
    K = min(len(ms), MAX_S_ORDER) if K is None else K
    if not 1 <= K <= MAX_S_ORDER:
        raise InvalidArgumentError(f"order must lie in [1, {MAX_S_ORDER}], got {K}")
    if K > len(ms):
        raise InvalidArgumentError(f"order {K} needs {K} moments, only {len(ms)} given")
    if ms.moments[0] == 0:
        raise DegenerateError("first moment is zero; the S-transform is undefined")
    psi = np.concatenate([[0.0], ms.moments[:K]])
    inv = series_revert(psi, K + 1)
    chi = inv[1:]
    s = chi.copy()
    s[1:] += chi[:-1]
    return s


def moments_from_s_transform(s, K=None):
    """Inverse of :func:`s_transform_from_moments`: moments ``m_1 .. m_K`` from ``s_0 .. s_{K-1}``."""
    s = np.asarray(s, dtype=np.float64)
    K = s.shape[0] if K is None else K
    if K > s.shape[0]:
        raise InvalidArgumentError(f"need {K} S-coefficients, got {s.shape[0]}")
    if s[0] == 0:
        raise DegenerateError("S-transform vanishes at 0")
    chi = np.empty(K)
    acc = 0.0
    for j in range(K):
        acc = s[j] - acc
        chi[j] = acc
    inv = np.concatenate([[0.0], chi])
    psi = series_revert(inv, K + 1)
    return MomentSeries(psi[1:], "matrix-moment")


def s_transform_product(*series):
    """Coefficientwise product of S-transforms, truncated to the shortest."""
    n = min(len(s) for s in series)
    out = np.zeros(n)
    out[0] = 1.0
    for s in series:
        out = series_mul(out, np.asarray(s, dtype=np.float64), n)
    return out


def jacobian_s_transform(s_d2, s_wwt, depth):
    """S-transform of ``J J^T`` for ``depth`` identical, freely independent layers."""
    if depth < 1:
        raise InvalidArgumentError(f"depth must be positive, got {depth}")
    return s_transform_product(*([s_d2] * depth + [s_wwt] * depth))


@lru_cache(maxsize=None)
def _catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def catalan_moments(K):
    return MomentSeries(np.array([_catalan(k) for k in range(1, K + 1)], dtype=np.float64))
