"""Caputo fractional derivatives of t^mu q(t) via Gauss-Jacobi quadrature.

After the substitution s = t*tau, the Caputo integral of t^mu q(t) over
(0, t) becomes an integral over (0, 1) whose endpoint singularities
(1-tau)^-nu tau^(mu-1) (order in (0,1)) or (1-tau)^(1-nu) tau^(mu-2)
(order in (1,2)) are exactly the Jacobi weight, leaving a smooth integrand:

    order nu in (0,1):
        D^nu [t^mu q](t) = t^(1-nu)/Gamma(1-nu) *
            int_0^1 (1-tau)^-nu tau^(mu-1) S1(t,tau) dtau,
        S1 = mu t^(mu-1) q(t tau) + t^mu tau q'(t tau)
    order nu in (1,2):
        D^nu [t^mu q](t) = t^(2-nu)/Gamma(2-nu) *
            int_0^1 (1-tau)^(1-nu) tau^(mu-2) S2(t,tau) dtau,
        S2 = mu(mu-1) t^(mu-2) q + 2 mu t^(mu-1) tau q' + t^mu tau^2 q''

A polynomial q makes S1/S2 polynomials in tau, so the rules are exact there;
that is the oracle the tests lean on. Probe-form entry points are pure numpy;
the model-form factor matrix is torch and differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from .model import TnnModel, temporal_values_normalized
from .nets import jet_tensors
from .quadrature import gamma, gauss_jacobi_unit

__all__ = [
    "FractionalOrders",
    "TemporalProbe",
    "select_mu",
    "caputo_low",
    "caputo_high",
    "caputo_multi",
    "caputo_tnn_factor",
    "caputo_power_rule",
]


@dataclass(frozen=True)
class FractionalOrders:
    """Strictly increasing Caputo orders, each in (0,1) or (1,2)."""

    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if not betas:
            raise ValueError("need at least one fractional order")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError(f"orders must be strictly increasing, got {betas}")
        for b in betas:
            if not (0.0 < b < 1.0 or 1.0 < b < 2.0):
                raise ValueError(f"order {b} outside (0,1) u (1,2)")

    def __iter__(self):
        return iter(self.betas)

    def __len__(self) -> int:
        return len(self.betas)

    @property
    def highest(self) -> float:
        return self.betas[-1]


@dataclass(frozen=True)
class TemporalProbe:
    """Scalar function of time with first (and usually second) derivative."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def from_polynomial(cls, coeffs: Sequence[float]) -> "TemporalProbe":
        poly = np.polynomial.Polynomial(list(coeffs))
        return cls(poly, poly.deriv(1), poly.deriv(2))

    @classmethod
    def constant(cls, value: float = 1.0) -> "TemporalProbe":
        return cls.from_polynomial([value])


def select_mu(orders: FractionalOrders) -> float:
    """Time exponent from the orders: beta_1 below 1, else the least order above 1."""
    if orders.highest < 1.0:
        return orders.betas[0]
    return min(b for b in orders if b > 1.0)


def caputo_low(
    nu: float,
    mu: float,
    probe: TemporalProbe,
    eval_times: np.ndarray,
    n_tau: int = 100,
) -> np.ndarray:
    """Caputo derivative of order nu in (0,1) of t^mu q(t) at positive times."""
    if not 0.0 < nu < 1.0:
        raise ValueError(f"caputo_low needs nu in (0,1), got {nu}")
    if not mu > 0.0:
        raise ValueError(f"caputo_low needs mu > 0, got {mu}")
    t = np.asarray(eval_times, dtype=float)
    rule = gauss_jacobi_unit(-nu, mu - 1.0, n_tau)
    tau, w = rule.nodes, rule.weights
    inner = t[:, None] * tau[None, :]
    q = probe.value(inner)
    q1 = probe.d1(inner)
    sum_q = q @ w
    sum_q1 = (q1 * tau) @ w
    return (mu * t ** (mu - nu) * sum_q + t ** (mu + 1.0 - nu) * sum_q1) / gamma(1.0 - nu)


def caputo_high(
    nu: float,
    mu: float,
    probe: TemporalProbe,
    eval_times: np.ndarray,
    n_tau: int = 100,
) -> np.ndarray:
    """Caputo derivative of order nu in (1,2) of t^mu q(t) at positive times."""
    if not 1.0 < nu < 2.0:
        raise ValueError(f"caputo_high needs nu in (1,2), got {nu}")
    if not mu > 1.0:
        raise ValueError(f"caputo_high needs mu > 1, got {mu}")
    if probe.d2 is None:
        raise ValueError("caputo_high needs a twice-differentiable probe")
    t = np.asarray(eval_times, dtype=float)
    rule = gauss_jacobi_unit(1.0 - nu, mu - 2.0, n_tau)
    tau, w = rule.nodes, rule.weights
    inner = t[:, None] * tau[None, :]
    sum_q = probe.value(inner) @ w
    sum_q1 = (probe.d1(inner) * tau) @ w
    sum_q2 = (probe.d2(inner) * tau**2) @ w
    return (
        mu * (mu - 1.0) * t ** (mu - nu) * sum_q
        + 2.0 * mu * t ** (mu + 1.0 - nu) * sum_q1
        + t ** (mu + 2.0 - nu) * sum_q2
    ) / gamma(2.0 - nu)


def caputo_multi(
    orders: FractionalOrders,
    mu: float,
    probe: TemporalProbe,
    eval_times: np.ndarray,
    n_tau: int = 100,
) -> np.ndarray:
    """Sum of Caputo derivatives of t^mu q(t) over all orders."""
    t = np.asarray(eval_times, dtype=float)
    out = np.zeros_like(t)
    for beta in orders:
        if beta < 1.0:
            out += caputo_low(beta, mu, probe, t, n_tau)
        else:
            out += caputo_high(beta, mu, probe, t, n_tau)
    return out


def caputo_power_rule(nu: float, power: float, t: np.ndarray) -> np.ndarray:
    """Closed form D^nu t^power = Gamma(power+1)/Gamma(power+1-nu) t^(power-nu)."""
    t = np.asarray(t, dtype=float)
    return gamma(power + 1.0) / gamma(power + 1.0 - nu) * t ** (power - nu)


def caputo_tnn_factor_tensors(
    model: TnnModel,
    orders: FractionalOrders,
    times: torch.Tensor,
    n_tau: int = 100,
    mu: float | None = None,
    normalized: bool = True,
) -> torch.Tensor:
    """Matrix (eval time, j) of sum_k D^beta_k [t^mu phi_hat_tj](t_q), torch.

    All inner quadrature points are evaluated through the temporal subnet in
    one batch; the result stays on the autograd tape. ``normalized=False``
    acts on the raw subnet columns (the operation is linear per column, so a
    zero column maps to a zero column instead of a degeneracy error).
    """
    mu = model.mu if mu is None else mu
    needs_second = any(b > 1.0 for b in orders)
    for beta in orders:
        if beta > 1.0 and not mu > 1.0:
            raise ValueError(f"order {beta} in (1,2) requires mu > 1, got mu={mu}")
        if beta < 1.0 and not mu > 0.0:
            raise ValueError(f"order {beta} in (0,1) requires mu > 0, got mu={mu}")

    rules = [
        gauss_jacobi_unit(-b, mu - 1.0, n_tau) if b < 1.0 else gauss_jacobi_unit(1.0 - b, mu - 2.0, n_tau)
        for b in orders
    ]
    n_t = times.shape[0]
    taus = [torch.tensor(r.nodes) for r in rules]
    inner = torch.cat([(times[:, None] * tau[None, :]).reshape(-1) for tau in taus])
    if normalized:
        val, d1, d2 = temporal_values_normalized(model, inner, order=2 if needs_second else 1)
    else:
        val, d1, d2 = jet_tensors(model.temporal_subnet, inner, order=2 if needs_second else 1)

    out = None
    offset = 0
    for beta, rule, tau in zip(orders, rules, taus):
        w = torch.tensor(rule.weights)
        block = slice(offset, offset + n_t * n_tau)
        offset += n_t * n_tau
        q = val[block].reshape(n_t, n_tau, -1)
        q1 = d1[block].reshape(n_t, n_tau, -1)
        sum_q = torch.einsum("k,tkj->tj", w, q)
        sum_q1 = torch.einsum("k,tkj->tj", w * tau, q1)
        if beta < 1.0:
            term = (
                mu * times[:, None] ** (mu - beta) * sum_q
                + times[:, None] ** (mu + 1.0 - beta) * sum_q1
            ) / gamma(1.0 - beta)
        else:
            q2 = d2[block].reshape(n_t, n_tau, -1)
            sum_q2 = torch.einsum("k,tkj->tj", w * tau * tau, q2)
            term = (
                mu * (mu - 1.0) * times[:, None] ** (mu - beta) * sum_q
                + 2.0 * mu * times[:, None] ** (mu + 1.0 - beta) * sum_q1
                + times[:, None] ** (mu + 2.0 - beta) * sum_q2
            ) / gamma(2.0 - beta)
        out = term if out is None else out + term
    return out


def caputo_tnn_factor(
    model: TnnModel,
    orders: FractionalOrders,
    eval_rule,
    n_tau: int = 100,
    normalized: bool = True,
) -> np.ndarray:
    """Numpy factor matrix at the rule's nodes (normalized temporal columns)."""
    times = torch.tensor(np.asarray(eval_rule.nodes, dtype=float))
    with torch.no_grad():
        out = caputo_tnn_factor_tensors(model, orders, times, n_tau, normalized=normalized)
    return out.numpy().copy()
