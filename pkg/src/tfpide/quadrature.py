"""Gauss-Jacobi and composite Gauss-Legendre quadrature rules.

Jacobi rules integrate a weight (1-t)^alpha (1+t)^beta on [-1, 1] (or the
shifted weight (1-t)^alpha t^beta on [0, 1]); the weight absorbs the weak
endpoint singularities that show up in fractional-derivative kernels, so the
remaining integrand is smooth and the rule converges spectrally.

Nodes come from the Golub-Welsch eigenvalue problem for the three-term
recurrence, polished by a few Newton steps on the Jacobi polynomial itself.
Weights are evaluated twice, from the Golub-Welsch eigenvectors (shipped,
robust for exponents near -1) and from the Gamma-function closed form, and
the two must agree; this guards against overflow and transcription mistakes
in either formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "QuadratureRule",
    "QuadratureError",
    "log_gamma",
    "gamma",
    "gauss_jacobi_reference",
    "gauss_jacobi_unit",
    "composite_gauss_legendre",
    "beta_function",
]

_NEWTON_STEPS = 3
_WEIGHT_AGREEMENT_RTOL = 1e-10


class QuadratureError(RuntimeError):
    """Node solver failed to produce a usable rule."""


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights approximating an integral over ``interval``.

    ``weight_exponents`` identifies the Jacobi weight absorbed into the
    weights; it is ``None`` for plain (Legendre-type) rules.
    """

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]
    weight_exponents: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        lo, hi = self.interval
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if nodes.size and (nodes[0] <= lo or nodes[-1] >= hi):
            raise ValueError(f"nodes must lie strictly inside ({lo}, {hi})")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of integrand values sampled at the nodes."""
        return float(np.dot(self.weights, values))


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if not x > 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def gamma(x: float) -> float:
    """Gamma function away from the poles at 0, -1, -2, ...

    Positive arguments go through :func:`log_gamma`; negative ones use the
    reflection formula, which keeps intermediate magnitudes tame.
    """
    if x > 0.0:
        return math.exp(log_gamma(x))
    if x == math.floor(x):
        raise ValueError(f"gamma pole at x = {x}")
    # Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return math.pi / (math.sin(math.pi * x) * math.exp(log_gamma(1.0 - x)))


def _jacobi_recurrence(n: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Monic three-term recurrence coefficients (a_k, b_k), k < n.

    p_{k+1}(t) = (t - a_k) p_k(t) - b_k p_{k-1}(t) with b_0 set to the total
    weight mass 2^(a+b+1) B(a+1, b+1).
    """
    ab = alpha + beta
    a = np.zeros(n)
    b = np.zeros(n)
    a[0] = (beta - alpha) / (ab + 2.0)
    b[0] = math.exp(
        (ab + 1.0) * math.log(2.0)
        + log_gamma(alpha + 1.0)
        + log_gamma(beta + 1.0)
        - log_gamma(ab + 2.0)
    )
    for k in range(1, n):
        s = 2.0 * k + ab
        a[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0))
        if k == 1:
            # general formula is 0/0 at ab = -1; the (1+ab) factor cancels
            b[1] = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0) ** 2 * (ab + 3.0))
        else:
            b[k] = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
    return a, b


def _jacobi_value_and_derivative(
    n: int, alpha: float, beta: float, t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """P_n^(alpha,beta)(t) and its derivative via the standard recurrences."""
    t = np.asarray(t, dtype=float)
    p_prev = np.ones_like(t)
    if n == 0:
        return p_prev, np.zeros_like(t)
    p = 0.5 * (alpha - beta) + 0.5 * (alpha + beta + 2.0) * t
    for k in range(2, n + 1):
        s = 2.0 * k + alpha + beta
        c1 = 2.0 * k * (k + alpha + beta) * (s - 2.0)
        c2 = (s - 1.0) * (alpha * alpha - beta * beta)
        c3 = (s - 1.0) * s * (s - 2.0)
        c4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * s
        p, p_prev = ((c2 + c3 * t) * p - c4 * p_prev) / c1, p
    s = 2.0 * n + alpha + beta
    # (2n+a+b)(1-t^2) P_n' = n[(a-b) - (2n+a+b) t] P_n + 2(n+a)(n+b) P_{n-1}
    deriv = (
        n * ((alpha - beta) - s * t) * p + 2.0 * (n + alpha) * (n + beta) * p_prev
    ) / (s * (1.0 - t * t))
    return p, deriv


@lru_cache(maxsize=256)
def gauss_jacobi_reference(alpha: float, beta: float, n: int) -> QuadratureRule:
    """N-point Gauss-Jacobi rule for (1-t)^alpha (1+t)^beta on [-1, 1]."""
    if alpha <= -1.0 or beta <= -1.0:
        raise ValueError(f"Jacobi exponents must exceed -1, got ({alpha}, {beta})")
    if n < 1:
        raise ValueError("need at least one node")

    diag, b = _jacobi_recurrence(n, alpha, beta)
    mu0 = b[0]
    if n == 1:
        nodes = diag.copy()
        vec0 = np.ones(1)
    else:
        nodes, vecs = eigh_tridiagonal(diag, np.sqrt(b[1:]))
        vec0 = vecs[0]
    gw_weights = mu0 * vec0**2

    for _ in range(_NEWTON_STEPS):
        val, der = _jacobi_value_and_derivative(n, alpha, beta, nodes)
        nodes = nodes - val / der

    _, der = _jacobi_value_and_derivative(n, alpha, beta, nodes)
    log_front = (
        (alpha + beta + 1.0) * math.log(2.0)
        + log_gamma(alpha + n + 1.0)
        + log_gamma(beta + n + 1.0)
        - log_gamma(n + 1.0)
        - log_gamma(alpha + beta + n + 1.0)
    )
    closed_form = np.exp(log_front) / ((1.0 - nodes**2) * der**2)

    # The closed form is exact but ill-conditioned in the node near +-1
    # (sensitivity ~ eps / (1 -+ t)), so the agreement demand is widened by
    # exactly that factor; a formula or overflow bug would still blow past it.
    gap = np.minimum(1.0 - nodes, 1.0 + nodes)
    allowed = _WEIGHT_AGREEMENT_RTOL + 1e-13 / gap
    mismatch = np.abs(closed_form - gw_weights) / gw_weights
    if np.any(mismatch > allowed):
        i = int(np.argmax(mismatch / allowed))
        raise QuadratureError(
            f"closed-form and Golub-Welsch weights disagree for "
            f"(alpha={alpha}, beta={beta}, n={n}): rel diff {mismatch[i]:.3e} "
            f"at node {nodes[i]:.15f}"
        )
    if np.any(np.diff(nodes) <= 0.0):
        raise QuadratureError(
            f"node ordering lost after Newton refinement (alpha={alpha}, beta={beta}, n={n})"
        )
    return QuadratureRule(nodes, gw_weights, (-1.0, 1.0), (alpha, beta))


@lru_cache(maxsize=256)
def gauss_jacobi_unit(alpha: float, beta: float, n: int) -> QuadratureRule:
    """Gauss-Jacobi rule for the weight (1-t)^alpha t^beta on [0, 1]."""
    ref = gauss_jacobi_reference(alpha, beta, n)
    nodes = 0.5 * (ref.nodes + 1.0)
    weights = ref.weights / 2.0 ** (alpha + beta + 1.0)
    return QuadratureRule(nodes, weights, (0.0, 1.0), (alpha, beta))


def composite_gauss_legendre(
    lo: float, hi: float, subintervals: int, points_per: int
) -> QuadratureRule:
    """Gauss-Legendre rule repeated over equal subintervals of [lo, hi]."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if subintervals < 1 or points_per < 1:
        raise ValueError("subintervals and points_per must be positive")
    base_x, base_w = np.polynomial.legendre.leggauss(points_per)
    edges = np.linspace(lo, hi, subintervals + 1)
    half = 0.5 * (hi - lo) / subintervals
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mids[:, None] + half * base_x[None, :]).ravel()
    weights = np.broadcast_to(half * base_w, (subintervals, points_per)).ravel()
    return QuadratureRule(nodes, weights, (lo, hi))


def beta_function(a: float, b: float) -> float:
    """Euler Beta function via log-gamma."""
    return math.exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b))
