"""Rank-p separable trial functions built from 1-D subnetworks.

The trial function is a sum of p rank-one products: one normalized factor per
spatial dimension, a t^mu prefactor enforcing the initial condition, and a
normalized temporal factor. Spatial factors are multiplied by the polynomial
(x-a)(b-x) before normalization when the dimension carries homogeneous
Dirichlet data, so boundary values vanish identically. Normalization
constants depend on the network weights and are recomputed (and
differentiated through) at every evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .nets import SubnetParams, init_params, jet_tensors
from .quadrature import QuadratureRule, composite_gauss_legendre

__all__ = [
    "DegenerateFactorError",
    "FactorTable",
    "TnnModel",
    "build_model",
    "spatial_factor_table",
    "temporal_factor_table",
    "evaluate",
    "evaluate_grid",
]

_NORM_FLOOR = 1e-150


class DegenerateFactorError(RuntimeError):
    """A factor column has (numerically) zero L2 norm and cannot be normalized."""


@dataclass
class TnnModel:
    """Separable trial function: subnets, linear coefficients, and metadata."""

    spatial_subnets: list[SubnetParams]
    temporal_subnet: SubnetParams
    c: torch.Tensor
    mu: float
    domain: list[tuple[float, float]]
    horizon: float
    boundary_mask: list[bool] = field(default_factory=list)
    norm_rules: list[QuadratureRule] = field(default_factory=list)

    def __post_init__(self) -> None:
        d = len(self.spatial_subnets)
        if len(self.domain) != d:
            raise ValueError("domain must list one interval per spatial dimension")
        if not self.boundary_mask:
            self.boundary_mask = [True] * d
        if len(self.boundary_mask) != d:
            raise ValueError("boundary_mask must have one flag per spatial dimension")
        widths = {net.output_width for net in self.spatial_subnets}
        widths.add(self.temporal_subnet.output_width)
        if len(widths) != 1:
            raise ValueError(f"all subnets must share the output width p, got {widths}")
        p = widths.pop()
        if not isinstance(self.c, torch.Tensor):
            self.c = torch.tensor(np.asarray(self.c, dtype=np.float64))
        if self.c.shape != (p,):
            raise ValueError(f"c must have shape ({p},), got {tuple(self.c.shape)}")
        for a, b in self.domain:
            if not a < b:
                raise ValueError(f"empty domain interval ({a}, {b})")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        if not self.norm_rules:
            self.norm_rules = default_norm_rules(self.domain, self.horizon)
        if len(self.norm_rules) != d + 1:
            raise ValueError("need one norm rule per spatial dimension plus one temporal")

    @property
    def rank(self) -> int:
        return self.temporal_subnet.output_width

    @property
    def dimension(self) -> int:
        return len(self.spatial_subnets)

    def all_subnets(self) -> list[SubnetParams]:
        return [*self.spatial_subnets, self.temporal_subnet]

    def set_c(self, c: np.ndarray | torch.Tensor) -> None:
        if isinstance(c, torch.Tensor):
            self.c = c.detach().clone().to(torch.float64)
        else:
            self.c = torch.tensor(np.asarray(c, dtype=np.float64))


@dataclass(frozen=True)
class FactorTable:
    """Normalized factor values and input-derivatives on a fixed node set."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def default_norm_rules(
    domain: list[tuple[float, float]], horizon: float, subintervals: int = 25, points: int = 16
) -> list[QuadratureRule]:
    rules = [composite_gauss_legendre(a, b, subintervals, points) for a, b in domain]
    rules.append(composite_gauss_legendre(0.0, horizon, subintervals, points))
    return rules


def build_model(
    domain: list[tuple[float, float]],
    horizon: float,
    rank: int,
    seed: int,
    mu: float,
    hidden: tuple[int, ...] = (50, 50, 50),
    boundary_mask: list[bool] | None = None,
    norm_rules: list[QuadratureRule] | None = None,
) -> TnnModel:
    """Fresh model with per-dimension subnet seeds derived from ``seed``."""
    d = len(domain)
    widths = [1, *hidden, rank]
    spatial = [init_params(seed + i, widths) for i in range(d)]
    temporal = init_params(seed + d, widths)
    c = torch.full((rank,), 1.0 / rank, dtype=torch.float64)
    return TnnModel(
        spatial_subnets=spatial,
        temporal_subnet=temporal,
        c=c,
        mu=mu,
        domain=list(domain),
        horizon=horizon,
        boundary_mask=list(boundary_mask) if boundary_mask is not None else [True] * d,
        norm_rules=list(norm_rules) if norm_rules is not None else [],
    )


def _boundary_jets(
    val: torch.Tensor,
    d1: torch.Tensor,
    d2: torch.Tensor | None,
    x: torch.Tensor,
    a: float,
    b: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
    """Product rule through the Dirichlet factor (x-a)(b-x)."""
    poly = ((x - a) * (b - x))[:, None]
    dpoly = (a + b - 2.0 * x)[:, None]
    g = val * poly
    g1 = d1 * poly + val * dpoly
    g2 = None
    if d2 is not None:
        g2 = d2 * poly + 2.0 * d1 * dpoly - 2.0 * val
    return g, g1, g2


def _column_norms(subnet: SubnetParams, rule: QuadratureRule, boundary: tuple[float, float] | None) -> torch.Tensor:
    nodes = torch.tensor(rule.nodes)
    weights = torch.tensor(rule.weights)
    val, d1, _ = jet_tensors(subnet, nodes, order=1)
    if boundary is not None:
        val, _, _ = _boundary_jets(val, d1, None, nodes, *boundary)
    norm_sq = weights @ (val * val)
    norms = torch.sqrt(norm_sq)
    if not bool(torch.isfinite(norms).all()) or bool((norms <= _NORM_FLOOR).any()):
        j = int(torch.argmin(norms))
        raise DegenerateFactorError(f"factor column {j} has L2 norm {norms[j].item():.3e}")
    return norms


def spatial_factor_tensors(
    model: TnnModel, dim: int, rule: QuadratureRule, order: int = 2
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
    """Normalized spatial factor jets at the rule nodes (torch, differentiable)."""
    a, b = model.domain[dim]
    lo, hi = rule.interval
    if lo < a - 1e-12 or hi > b + 1e-12:
        raise ValueError(f"rule on ({lo}, {hi}) leaves dimension-{dim} domain ({a}, {b})")
    subnet = model.spatial_subnets[dim]
    boundary = (a, b) if model.boundary_mask[dim] else None
    norms = _column_norms(subnet, model.norm_rules[dim], boundary)
    nodes = torch.tensor(rule.nodes)
    val, d1, d2 = jet_tensors(subnet, nodes, order=order)
    if boundary is not None:
        val, d1, d2 = _boundary_jets(val, d1, d2, nodes, a, b)
    if d2 is None:
        return val / norms, d1 / norms, None
    return val / norms, d1 / norms, d2 / norms


def temporal_factor_tensors(
    model: TnnModel, rule: QuadratureRule, order: int = 2
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
    """Normalized temporal factor jets, without the t^mu prefactor."""
    norms = _column_norms(model.temporal_subnet, model.norm_rules[-1], None)
    nodes = torch.tensor(rule.nodes)
    val, d1, d2 = jet_tensors(model.temporal_subnet, nodes, order=order)
    if d2 is None:
        return val / norms, d1 / norms, None
    return val / norms, d1 / norms, d2 / norms


def temporal_values_normalized(model: TnnModel, points: torch.Tensor, order: int = 2):
    """Normalized temporal factor jets at arbitrary points in (0, T]."""
    norms = _column_norms(model.temporal_subnet, model.norm_rules[-1], None)
    val, d1, d2 = jet_tensors(model.temporal_subnet, points, order=order)
    if order < 2:
        return val / norms, d1 / norms, None
    return val / norms, d1 / norms, d2 / norms


def spatial_values_normalized(model: TnnModel, dim: int, points: torch.Tensor, order: int = 1):
    """Normalized spatial factor jets at arbitrary points inside the domain."""
    a, b = model.domain[dim]
    subnet = model.spatial_subnets[dim]
    boundary = (a, b) if model.boundary_mask[dim] else None
    norms = _column_norms(subnet, model.norm_rules[dim], boundary)
    val, d1, d2 = jet_tensors(subnet, points, order=max(order, 1))
    if boundary is not None:
        val, d1, d2 = _boundary_jets(val, d1, d2, points, a, b)
    if order < 2:
        return val / norms, d1 / norms, None
    return val / norms, d1 / norms, d2 / norms


def spatial_factor_table(model: TnnModel, dim: int, rule: QuadratureRule) -> FactorTable:
    """Numpy view of the normalized spatial factor and its derivatives."""
    with torch.no_grad():
        val, d1, d2 = spatial_factor_tensors(model, dim, rule)
    return FactorTable(val.numpy().copy(), d1.numpy().copy(), d2.numpy().copy())


def temporal_factor_table(model: TnnModel, rule: QuadratureRule) -> FactorTable:
    """Numpy view of the normalized temporal factor (no t^mu) and derivatives."""
    with torch.no_grad():
        val, d1, d2 = temporal_factor_tensors(model, rule)
    return FactorTable(val.numpy().copy(), d1.numpy().copy(), d2.numpy().copy())


def evaluate(model: TnnModel, points) -> np.ndarray:
    """Trial-function values at a list of (x vector, t) points."""
    pts = [(np.atleast_1d(np.asarray(x, dtype=float)), float(t)) for x, t in points]
    if not pts:
        return np.zeros(0)
    d = model.dimension
    with torch.no_grad():
        prod = None
        for i in range(d):
            xs = torch.tensor(np.array([x[i] for x, _ in pts]))
            subnet = model.spatial_subnets[i]
            a, b = model.domain[i]
            boundary = (a, b) if model.boundary_mask[i] else None
            norms = _column_norms(subnet, model.norm_rules[i], boundary)
            val, d1, _ = jet_tensors(subnet, xs, order=1)
            if boundary is not None:
                val, _, _ = _boundary_jets(val, d1, None, xs, a, b)
            val = val / norms
            prod = val if prod is None else prod * val
        ts = torch.tensor(np.array([t for _, t in pts]))
        tval, _, _ = temporal_values_normalized(model, ts, order=1)
        tmu = ts.reshape(-1, 1) ** model.mu
        prod = prod * tval * tmu
        out = prod @ model.c
    return out.numpy().copy()


def evaluate_grid(model: TnnModel, axes: list[np.ndarray], t_nodes: np.ndarray) -> np.ndarray:
    """Trial-function values on a tensor grid, shape (*axis sizes, n_t)."""
    with torch.no_grad():
        factors = []
        for i, nodes in enumerate(axes):
            subnet = model.spatial_subnets[i]
            a, b = model.domain[i]
            boundary = (a, b) if model.boundary_mask[i] else None
            norms = _column_norms(subnet, model.norm_rules[i], boundary)
            x = torch.tensor(np.asarray(nodes, dtype=float))
            val, d1, _ = jet_tensors(subnet, x, order=1)
            if boundary is not None:
                val, _, _ = _boundary_jets(val, d1, None, x, a, b)
            factors.append((val / norms).numpy())
        ts = torch.tensor(np.asarray(t_nodes, dtype=float))
        tval, _, _ = temporal_values_normalized(model, ts, order=1)
        tfac = (ts.reshape(-1, 1) ** model.mu * tval).numpy()
        c = model.c.numpy()
    letters = "abcdefgh"
    operands = []
    script = []
    for i, f in enumerate(factors):
        operands.append(f)
        script.append(f"{letters[i]}j")
    operands.append(tfac * c)
    script.append("tj")
    out_axes = "".join(letters[: len(factors)]) + "t"
    return np.einsum(",".join(script) + "->" + out_axes, *operands)
