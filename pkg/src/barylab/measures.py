"""Histograms on the probability simplex, ground costs, and simplex geometry.

Conventions used throughout the package:

* a histogram is a dense nonnegative vector summing to 1 (weights of a
  discrete measure);
* ``0 * log 0 = 0`` everywhere;
* ground cost matrices are symmetric and nonnegative.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, InvalidInputError

# Constructors renormalize when |sum - 1| <= RENORM_TOL and reject larger
# deviations; membership itself is then exact to SIMPLEX_TOL.
SIMPLEX_TOL = 1e-12
RENORM_TOL = 1e-9


def _as_vector(w, name="input"):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 1-d vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return w


class Histogram:
    """A point of the probability simplex.

    The constructor validates nonnegativity, renormalizes inputs whose sum
    deviates from 1 by at most ``1e-9``, and rejects larger deviations.
    """

    __slots__ = ("weights", "interior_min")

    def __init__(self, weights, interior_min=None):
        w = _as_vector(weights, "histogram weights")
        if np.any(w < -SIMPLEX_TOL):
            raise InvalidInputError("histogram weights must be nonnegative")
        w = np.maximum(w, 0.0)
        s = w.sum()
        if abs(s - 1.0) > RENORM_TOL:
            raise InvalidInputError(f"histogram weights sum to {s!r}, too far from 1 to renormalize")
        if s != 1.0:
            w = w / s
        self.weights = w
        self.weights.flags.writeable = False
        self.interior_min = interior_min

    @property
    def support_size(self):
        return self.weights.size

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __repr__(self):
        return f"Histogram({self.weights!r})"


def as_weights(p, name="histogram"):
    """Coerce a Histogram or array-like to a validated weight vector."""
    if isinstance(p, Histogram):
        return p.weights
    return Histogram(_as_vector(p, name)).weights


class CostMatrix:
    """Symmetric nonnegative ground cost between support points."""

    __slots__ = ("entries", "inf_norm")

    def __init__(self, entries):
        c = np.asarray(entries, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidInputError(f"cost matrix must be square, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("cost matrix contains non-finite entries")
        if np.any(c < 0):
            raise InvalidInputError("cost matrix must be nonnegative")
        if not np.array_equal(c, c.T):
            raise InvalidInputError("cost matrix must be symmetric")
        self.entries = c
        self.entries.flags.writeable = False
        self.inf_norm = float(c.max()) if c.size else 0.0

    @property
    def n(self):
        return self.entries.shape[0]

    def vectorized(self):
        return CostVector(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


class CostVector:
    """Row-major vectorization d of a cost matrix: d[(i-1)n+j] = C_ij."""

    __slots__ = ("d", "inf_norm", "n")

    def __init__(self, cost):
        if not isinstance(cost, CostMatrix):
            cost = CostMatrix(cost)
        self.d = cost.entries.ravel()
        self.inf_norm = cost.inf_norm
        self.n = cost.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.d, dtype=dtype)


class TransportPlan:
    """Coupling with prescribed marginals; total mass 1."""

    __slots__ = ("pi", "row_marginal", "col_marginal", "marginal_error")

    def __init__(self, pi, marginal_error=0.0):
        pi = np.asarray(pi, dtype=np.float64)
        if pi.ndim != 2:
            raise InvalidInputError("transport plan must be a matrix")
        if np.any(pi < -SIMPLEX_TOL):
            raise InvalidInputError("transport plan must be nonnegative")
        pi = np.maximum(pi, 0.0)
        mass = pi.sum()
        if abs(mass - 1.0) > 1e-10:
            raise InvalidInputError(f"transport plan mass {mass!r} deviates from 1 by more than 1e-10")
        self.pi = pi
        self.pi.flags.writeable = False
        self.row_marginal = Histogram(pi.sum(axis=1))
        self.col_marginal = Histogram(pi.sum(axis=0))
        self.marginal_error = float(marginal_error)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.pi, dtype=dtype)


def cost_matrix_grid(support_points, exponent=2.0):
    """Ground cost C_ij = |x_i - x_j|**exponent on a 1-d support."""
    x = _as_vector(support_points, "support points")
    if exponent < 1:
        raise InvalidInputError("exponent must be >= 1")
    c = np.abs(x[:, None] - x[None, :]) ** exponent
    np.fill_diagonal(c, 0.0)
    # enforce exact symmetry against float noise in the power
    c = 0.5 * (c + c.T)
    return CostMatrix(c)


def project_simplex(w):
    """Euclidean projection onto the simplex by sorting and thresholding.

    Sorts the components in decreasing order, finds the largest j whose
    prefix keeps ``r_j - (sum_{i<=j} r_i - 1)/j`` positive, and clips at the
    resulting threshold. Stable sort keeps ties deterministic; the projected
    value is tie-invariant.
    """
    w = _as_vector(w, "projection input")
    r = np.sort(w, kind="stable")[::-1]
    csum = np.cumsum(r) - 1.0
    j = np.arange(1, w.size + 1)
    positive = r - csum / j > 0
    rho = int(np.nonzero(positive)[0][-1]) + 1
    theta = csum[rho - 1] / rho
    return Histogram(np.maximum(w - theta, 0.0))


def kl_divergence(p, q):
    """Generalized KL divergence <p, log(p/q)> - 1^T (p - q).

    ``p`` may have zero entries (0 log 0 = 0); ``q`` must be strictly
    positive.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidInputError("kl_divergence requires vectors of equal length")
    if np.any(q <= 0):
        raise DomainError("kl_divergence requires strictly positive second argument")
    if np.any(p < 0):
        raise DomainError("kl_divergence requires nonnegative first argument")
    mask = p > 0
    val = float(np.sum(p[mask] * np.log(p[mask] / q[mask])) - p.sum() + q.sum())
    return val


def bregman_exponent(n):
    """Norm exponent a = 1 + 1/(2 log n) of the simplex prox-function."""
    if n < 2:
        raise InvalidInputError("bregman exponent needs support size >= 2")
    return 1.0 + 1.0 / (2.0 * math.log(n))


def prox_function_value(p, n=None):
    """d(p) = ||p||_a^2 / (2(a-1)), 1-strongly convex in the l1-norm."""
    p = np.asarray(p, dtype=np.float64)
    a = bregman_exponent(p.size if n is None else n)
    norm_a = np.sum(np.abs(p) ** a) ** (1.0 / a)
    return norm_a**2 / (2.0 * (a - 1.0))


def prox_function_gradient(p, n=None):
    """grad d(p), entrywise ||p||_a^(2-a) p_i^(a-1) / (a-1); needs p > 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise DomainError("prox-function gradient requires strictly positive input")
    a = bregman_exponent(p.size if n is None else n)
    norm_a = np.sum(p**a) ** (1.0 / a)
    return norm_a ** (2.0 - a) * p ** (a - 1.0) / (a - 1.0)


class BregmanPenalty:
    """Bregman divergence of the simplex prox-function, anchored at p1.

    ``value(p)`` is 1-strongly convex in the l1-norm and vanishes exactly
    at the anchor.
    """

    __slots__ = ("reference", "a", "_d_ref", "_grad_ref")

    def __init__(self, reference):
        ref = as_weights(reference, "penalty reference")
        if np.any(ref <= 0):
            raise DomainError("penalty reference must be strictly positive")
        self.reference = ref
        self.a = bregman_exponent(ref.size)
        self._d_ref = prox_function_value(ref)
        self._grad_ref = prox_function_gradient(ref)

    def value(self, p):
        p = as_weights(p, "penalty argument")
        return float(prox_function_value(p) - self._d_ref - self._grad_ref @ (p - self.reference))

    def gradient(self, p):
        p = np.asarray(p, dtype=np.float64)
        return prox_function_gradient(p) - self._grad_ref


def bregman_penalty_value(p, p1, n=None):
    """B_d(p, p1) for histograms p, p1 with p1 strictly positive."""
    return BregmanPenalty(p1).value(p)


def smooth_to_interior(p, rho):
    """Mix with the uniform measure: (p + rho 1) / (1 + n rho).

    Guarantees every entry is at least rho / (1 + n rho), placing the
    result in the interior of the simplex.
    """
    w = as_weights(p, "histogram")
    n = w.size
    if not 0 < rho < 1.0 / n:
        raise InvalidInputError(f"rho must lie in (0, 1/n); got {rho} for n={n}")
    smoothed = (w + rho) / (1.0 + n * rho)
    return Histogram(smoothed, interior_min=rho / (1.0 + n * rho))


def load_histograms(path):
    """Read histograms from text: one measure per line, comma or whitespace
    separated nonnegative reals. Lines are renormalized per the constructor
    tolerance rule."""
    measures = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                w = np.array([float(tok) for tok in parts])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: unparsable histogram line") from exc
            s = w.sum()
            if s <= 0:
                raise InvalidInputError(f"{path}:{lineno}: histogram has nonpositive mass")
            measures.append(Histogram(w / s))
    if not measures:
        raise InvalidInputError(f"{path}: no histograms found")
    sizes = {len(h) for h in measures}
    if len(sizes) > 1:
        raise InvalidInputError(f"{path}: histograms have inconsistent sizes {sorted(sizes)}")
    return measures


def save_histograms(path, measures):
    with open(path, "w", encoding="utf-8") as fh:
        for h in measures:
            fh.write(" ".join(repr(float(x)) for x in np.asarray(h)) + "\n")
