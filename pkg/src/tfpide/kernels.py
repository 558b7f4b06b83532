"""Quadrature schemes for the Fredholm and Volterra integral operators.

Every operator comes in two independent forms. The model form acts on the
separable trial function and exploits its rank-one structure, so each
integral collapses to one-dimensional weighted sums per factor (torch,
differentiable). The probe form acts on a plain callable by direct nested
quadrature (numpy); the tests pit the two against each other and against
closed forms.

Volterra integrals are mapped onto [0, 1] by s = x*n, tau = t*m before
applying composite Gauss-Legendre rules; the weakly singular Fredholm kernel
|t-s|^(-1/2) is split at s = t into two Volterra pieces whose singular
factors become Jacobi weights (0, -1/2) and (-1/2, mu).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model import TnnModel, spatial_values_normalized, temporal_values_normalized
from .quadrature import composite_gauss_legendre, gauss_jacobi_unit

__all__ = [
    "KernelDescriptor",
    "fredholm_quadratic_st",
    "fredholm_quadratic_probe",
    "fredholm_weak_singular",
    "fredholm_weak_singular_probe",
    "volterra_double_exp",
    "volterra_double_probe",
    "volterra_quadruple_3d",
    "volterra_quadruple_probe",
]

KERNEL_KINDS = (
    "none",
    "fredholm_quadratic_st",
    "fredholm_weak_singular",
    "volterra_double_exp",
    "volterra_quadruple_3d",
)


@dataclass(frozen=True)
class KernelDescriptor:
    """Names one of the supported integral operators plus its rule sizes."""

    kind: str
    subintervals: int = 25
    points_per: int = 16
    n_singular: int = 100

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; known: {KERNEL_KINDS}")
        if self.subintervals < 1 or self.points_per < 1 or self.n_singular < 1:
            raise ValueError("rule sizes must be positive")


def _unit_rule(subintervals: int, points_per: int):
    return composite_gauss_legendre(0.0, 1.0, subintervals, points_per)


# ---------------------------------------------------------------------------
# Fredholm with kernel (1/2) cos(x) s t acting on the square of the solution
# ---------------------------------------------------------------------------


def fredholm_quadratic_spatial_gram(
    model: TnnModel, subintervals: int = 25, points_per: int = 16
) -> torch.Tensor:
    """S[i, j] = sum_k w_k s_k phi_hat_1i(s_k) phi_hat_1j(s_k) over the domain."""
    a, b = model.domain[0]
    rule = composite_gauss_legendre(a, b, subintervals, points_per)
    s = torch.tensor(rule.nodes)
    w = torch.tensor(rule.weights)
    val, _, _ = spatial_values_normalized(model, 0, s, order=1)
    return torch.einsum("k,ki,kj->ij", w * s, val, val)


def fredholm_quadratic_st(model: TnnModel, x_nodes: np.ndarray, t_nodes: np.ndarray) -> np.ndarray:
    """(1/2) cos(x) int s t Psi^2(s, t) ds on the (x, t) grid, factorized."""
    x = np.asarray(x_nodes, dtype=float)
    t = np.asarray(t_nodes, dtype=float)
    desc = KernelDescriptor("fredholm_quadratic_st")
    with torch.no_grad():
        gram = fredholm_quadratic_spatial_gram(model, desc.subintervals, desc.points_per)
        tt = torch.tensor(t)
        tval, _, _ = temporal_values_normalized(model, tt, order=1)
        ct = model.c[None, :] * tval  # (nt, p)
        time_part = torch.einsum("ti,ij,tj->t", ct, gram, ct) * tt ** (2.0 * model.mu + 1.0)
        out = 0.5 * np.cos(x)[:, None] * time_part.numpy()[None, :]
    return out


def fredholm_quadratic_probe(
    u, x_nodes: np.ndarray, t_nodes: np.ndarray, domain=(-np.pi / 2, np.pi / 2),
    subintervals: int = 25, points_per: int = 16,
) -> np.ndarray:
    """Same operator applied to a callable u(s, t) by direct quadrature."""
    x = np.asarray(x_nodes, dtype=float)
    t = np.asarray(t_nodes, dtype=float)
    rule = composite_gauss_legendre(*domain, subintervals, points_per)
    s = rule.nodes[:, None]
    inner = (rule.weights * rule.nodes) @ u(s, t[None, :]) ** 2  # (nt,)
    return 0.5 * np.cos(x)[:, None] * (t * inner)[None, :]


# ---------------------------------------------------------------------------
# Weakly singular Fredholm kernel |t-s|^(-1/2) acting linearly in time
# ---------------------------------------------------------------------------


def fredholm_weak_singular(
    probe, mu: float, eval_times: np.ndarray, n_nodes: int = 100
) -> np.ndarray:
    """int_0^1 |t-s|^(-1/2) s^mu q(s) ds at each t, via the two-piece split.

    Right piece (s > t): substitute s = t + (1-t) m, Jacobi weight (0, -1/2).
    Left piece (s < t): substitute s = t m, Jacobi weight (-1/2, mu).
    """
    if mu <= -1.0:
        raise ValueError("mu must exceed -1")
    t = np.asarray(eval_times, dtype=float)
    right = gauss_jacobi_unit(0.0, -0.5, n_nodes)
    left = gauss_jacobi_unit(-0.5, mu, n_nodes)
    s_right = t[:, None] + (1.0 - t)[:, None] * right.nodes[None, :]
    right_part = np.sqrt(1.0 - t) * ((s_right**mu * probe(s_right)) @ right.weights)
    s_left = t[:, None] * left.nodes[None, :]
    left_part = t ** (0.5 + mu) * (probe(s_left) @ left.weights)
    return right_part + left_part


def fredholm_weak_singular_split(
    probe, mu: float, eval_times: np.ndarray, n_nodes: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """(left, right) pieces of the split, for sign/shape diagnostics."""
    t = np.asarray(eval_times, dtype=float)
    right = gauss_jacobi_unit(0.0, -0.5, n_nodes)
    left = gauss_jacobi_unit(-0.5, mu, n_nodes)
    s_right = t[:, None] + (1.0 - t)[:, None] * right.nodes[None, :]
    right_part = np.sqrt(1.0 - t) * ((s_right**mu * probe(s_right)) @ right.weights)
    s_left = t[:, None] * left.nodes[None, :]
    left_part = t ** (0.5 + mu) * (probe(s_left) @ left.weights)
    return left_part, right_part


def weak_singular_time_factor_tensors(
    model: TnnModel, times: torch.Tensor, n_nodes: int = 100
) -> torch.Tensor:
    """W[q, j] = int_0^1 |t_q - s|^(-1/2) s^mu phi_hat_tj(s) ds (torch)."""
    mu = model.mu
    right = gauss_jacobi_unit(0.0, -0.5, n_nodes)
    left = gauss_jacobi_unit(-0.5, mu, n_nodes)
    rn = torch.tensor(right.nodes)
    rw = torch.tensor(right.weights)
    ln = torch.tensor(left.nodes)
    lw = torch.tensor(left.weights)
    n_t = times.shape[0]
    s_right = (times[:, None] + (1.0 - times)[:, None] * rn[None, :]).reshape(-1)
    s_left = (times[:, None] * ln[None, :]).reshape(-1)
    val, _, _ = temporal_values_normalized(model, torch.cat([s_right, s_left]), order=1)
    v_right = val[: n_t * n_nodes].reshape(n_t, n_nodes, -1)
    v_left = val[n_t * n_nodes :].reshape(n_t, n_nodes, -1)
    s_right_mu = s_right.reshape(n_t, n_nodes) ** mu
    right_part = torch.sqrt(1.0 - times)[:, None] * torch.einsum(
        "tk,tkj->tj", s_right_mu * rw[None, :], v_right
    )
    left_part = (times ** (0.5 + mu))[:, None] * torch.einsum("k,tkj->tj", lw, v_left)
    return right_part + left_part


# ---------------------------------------------------------------------------
# Volterra double integral with kernel tau e^(x-s)
# ---------------------------------------------------------------------------


def volterra_double_factors(
    model: TnnModel,
    x_nodes: torch.Tensor,
    t_nodes: torch.Tensor,
    subintervals: int = 25,
    points_per: int = 16,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Separable factors (A, G) with the double integral = sum_j c_j A[:, j] G[:, j]^T.

    A[q, j] = x_q sum_i w_i e^(x_q (1 - n_i)) phi_hat_1j(x_q n_i)
    G[r, j] = t_r^(2+mu) sum_k w_k m_k^(1+mu) phi_hat_tj(t_r m_k)
    """
    rule = _unit_rule(subintervals, points_per)
    n = torch.tensor(rule.nodes)
    w = torch.tensor(rule.weights)
    nx, nt, nn = x_nodes.shape[0], t_nodes.shape[0], len(rule)
    sx = (x_nodes[:, None] * n[None, :]).reshape(-1)
    sval, _, _ = spatial_values_normalized(model, 0, sx, order=1)
    sval = sval.reshape(nx, nn, -1)
    expfac = torch.exp(x_nodes[:, None] * (1.0 - n[None, :])) * w[None, :]
    a_fac = x_nodes[:, None] * torch.einsum("qk,qkj->qj", expfac, sval)
    st = (t_nodes[:, None] * n[None, :]).reshape(-1)
    tval, _, _ = temporal_values_normalized(model, st, order=1)
    tval = tval.reshape(nt, nn, -1)
    g_fac = (t_nodes ** (2.0 + model.mu))[:, None] * torch.einsum(
        "k,rkj->rj", w * n ** (1.0 + model.mu), tval
    )
    return a_fac, g_fac


def volterra_double_exp(model: TnnModel, x_nodes: np.ndarray, t_nodes: np.ndarray) -> np.ndarray:
    """int_0^t int_0^x tau e^(x-s) Psi(s, tau) ds dtau on the (x, t) grid."""
    with torch.no_grad():
        a_fac, g_fac = volterra_double_factors(
            model,
            torch.tensor(np.asarray(x_nodes, dtype=float)),
            torch.tensor(np.asarray(t_nodes, dtype=float)),
        )
        out = torch.einsum("qj,rj,j->qr", a_fac, g_fac, model.c)
    return out.numpy().copy()


def volterra_double_probe(
    u, x_nodes: np.ndarray, t_nodes: np.ndarray, subintervals: int = 25, points_per: int = 16
) -> np.ndarray:
    """Same double integral applied to a callable u(s, tau) on the grid."""
    x = np.asarray(x_nodes, dtype=float)
    t = np.asarray(t_nodes, dtype=float)
    rule = _unit_rule(subintervals, points_per)
    n, w = rule.nodes, rule.weights
    out = np.empty((x.size, t.size))
    for qi, xq in enumerate(x):
        s = xq * n
        efac = w * np.exp(xq * (1.0 - n))
        for ri, tr in enumerate(t):
            tau = tr * n
            vals = u(s[:, None], tau[None, :])
            out[qi, ri] = xq * tr * (efac @ vals @ (w * tau))
    return out


# ---------------------------------------------------------------------------
# Quadruple Volterra integral with kernel tau (p - q) in three dimensions
# ---------------------------------------------------------------------------


def volterra_quadruple_factors(
    model: TnnModel,
    axes_nodes: list[torch.Tensor],
    t_nodes: torch.Tensor,
    subintervals: int = 10,
    points_per: int = 16,
) -> dict[str, torch.Tensor]:
    """Per-axis separable factors of the quadruple integral.

    value = sum_j c_j [A1 B2 - C1 E2] F3 G, with
    A1[q,j] = x1 sum w (x1 m) phi_1j(x1 m),   C1[q,j] = x1 sum w phi_1j(x1 m)
    E2[q,j] = x2 sum w (x2 n) phi_2j(x2 n),   B2[q,j] = x2 sum w phi_2j(x2 n)
    F3[q,j] = x3 sum w phi_3j(x3 h)
    G[r,j]  = t^(2+mu) sum w eta^(1+mu) phi_tj(t eta)
    """
    rule = _unit_rule(subintervals, points_per)
    n = torch.tensor(rule.nodes)
    w = torch.tensor(rule.weights)
    nn = len(rule)
    out: dict[str, torch.Tensor] = {}
    for dim, (plain_key, moment_key) in enumerate((("C1", "A1"), ("B2", "E2"), ("F3", None))):
        x = axes_nodes[dim]
        pts = (x[:, None] * n[None, :]).reshape(-1)
        val, _, _ = spatial_values_normalized(model, dim, pts, order=1)
        val = val.reshape(x.shape[0], nn, -1)
        out[plain_key] = x[:, None] * torch.einsum("k,qkj->qj", w, val)
        if moment_key is not None:
            inner = pts.reshape(x.shape[0], nn)
            out[moment_key] = x[:, None] * torch.einsum("qk,qkj->qj", w[None, :] * inner, val)
    st = (t_nodes[:, None] * n[None, :]).reshape(-1)
    tval, _, _ = temporal_values_normalized(model, st, order=1)
    tval = tval.reshape(t_nodes.shape[0], nn, -1)
    out["G"] = (t_nodes ** (2.0 + model.mu))[:, None] * torch.einsum(
        "k,rkj->rj", w * n ** (1.0 + model.mu), tval
    )
    return out


def volterra_quadruple_3d(
    model: TnnModel, axes_nodes: list[np.ndarray], t_nodes: np.ndarray
) -> np.ndarray:
    """Quadruple Volterra integral on the tensor grid, shape (n1, n2, n3, nt)."""
    with torch.no_grad():
        fac = volterra_quadruple_factors(
            model,
            [torch.tensor(np.asarray(a, dtype=float)) for a in axes_nodes],
            torch.tensor(np.asarray(t_nodes, dtype=float)),
        )
        cg = fac["G"] * model.c[None, :]
        out = torch.einsum("aj,bj,cj,tj->abct", fac["A1"], fac["B2"], fac["F3"], cg) - torch.einsum(
            "aj,bj,cj,tj->abct", fac["C1"], fac["E2"], fac["F3"], cg
        )
    return out.numpy().copy()


def volterra_quadruple_probe(
    u, x: np.ndarray, t: float, subintervals: int = 10, points_per: int = 16
) -> float:
    """Quadruple integral of tau (p - q) u(p, q, s, tau) applied to a callable.

    Accumulates one time slice at a time so the grid never exceeds three
    dimensions in memory.
    """
    rule = _unit_rule(subintervals, points_per)
    n, w = rule.nodes, rule.weights
    x1, x2, x3 = (float(v) for v in x)
    p = x1 * n
    q = x2 * n
    s = x3 * n
    pm, qm, sm = np.meshgrid(p, q, s, indexing="ij")
    kern = pm - qm
    acc = 0.0
    for tau_k, w_k in zip(t * n, w):
        vals = kern * u(pm, qm, sm, np.full_like(pm, tau_k))
        acc += w_k * tau_k * np.einsum("a,b,c,abc->", w, w, w, vals)
    return float(x1 * x2 * x3 * t * acc)
