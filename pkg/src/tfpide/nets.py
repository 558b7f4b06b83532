"""1-D fully connected subnetworks with exact input-derivative jets.

Each subnetwork maps a scalar input to p outputs through tanh hidden layers
and a linear output layer. Evaluation propagates the triple (value, first,
second derivative) with respect to the scalar input layer by layer, so both
derivatives are exact to roundoff and remain differentiable with respect to
the weights; parameter gradients of any scalar objective built on top come
from reverse accumulation through the whole computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

__all__ = [
    "Jet",
    "SubnetParams",
    "NumericError",
    "init_params",
    "forward_jet",
    "forward_jet_batch",
    "jet_tensors",
    "parameter_gradient",
    "flatten_gradients",
]

DEFAULT_HIDDEN = (50, 50, 50)


class NumericError(RuntimeError):
    """A non-finite value appeared during evaluation or differentiation."""


@dataclass(frozen=True)
class Jet:
    """Output vector and its first two derivatives w.r.t. the scalar input."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


class SubnetParams:
    """Weights and biases of one subnetwork, kept as float64 torch leaves."""

    def __init__(self, layers: Sequence[tuple[torch.Tensor, torch.Tensor]], seed: int | None = None):
        if not layers:
            raise ValueError("a subnetwork needs at least one layer")
        if layers[0][0].shape[1] != 1:
            raise ValueError("first layer must take a scalar input")
        for (w_prev, _), (w_next, _) in zip(layers, layers[1:]):
            if w_next.shape[1] != w_prev.shape[0]:
                raise ValueError("layer shapes do not chain")
        for w, b in layers:
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape must match layer output width")
            if not (torch.isfinite(w).all() and torch.isfinite(b).all()):
                raise ValueError("parameters must be finite")
        self.layers = list(layers)
        self.seed = seed

    @property
    def widths(self) -> list[int]:
        return [1] + [w.shape[0] for w, _ in self.layers]

    @property
    def output_width(self) -> int:
        return self.layers[-1][0].shape[0]

    def tensors(self) -> list[torch.Tensor]:
        """All parameter leaves in a fixed order (W0, b0, W1, b1, ...)."""
        out: list[torch.Tensor] = []
        for w, b in self.layers:
            out.extend((w, b))
        return out

    def parameter_count(self) -> int:
        return sum(t.numel() for t in self.tensors())

    def to_arrays(self) -> list[np.ndarray]:
        return [t.detach().numpy().copy() for t in self.tensors()]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], seed: int | None = None) -> "SubnetParams":
        if len(arrays) % 2 != 0:
            raise ValueError("expected (weight, bias) pairs")
        layers = []
        for i in range(0, len(arrays), 2):
            w = torch.tensor(np.asarray(arrays[i], dtype=np.float64), requires_grad=True)
            b = torch.tensor(np.asarray(arrays[i + 1], dtype=np.float64), requires_grad=True)
            layers.append((w, b))
        return cls(layers, seed=seed)


def init_params(seed: int, widths: Sequence[int] | None = None) -> SubnetParams:
    """Glorot-uniform weights and zero biases, deterministic in the seed."""
    if widths is None:
        widths = [1, *DEFAULT_HIDDEN, 50]
    widths = list(widths)
    if len(widths) < 2 or widths[0] != 1 or any(w < 1 for w in widths):
        raise ValueError(f"invalid widths {widths}")
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(
            (
                torch.tensor(w, dtype=torch.float64, requires_grad=True),
                torch.zeros(fan_out, dtype=torch.float64, requires_grad=True),
            )
        )
    return SubnetParams(layers, seed=seed)


def jet_tensors(
    params: SubnetParams, x: torch.Tensor, order: int = 2
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
    """Batched jet propagation; returns (value, d1, d2), each (n, p).

    ``order=1`` skips the second-derivative stream (d2 is None), which saves
    a third of the matrix products when no second time derivative is needed.
    """
    x = x.reshape(-1)
    v = x[:, None]
    d1 = torch.ones_like(v)
    d2 = torch.zeros_like(v) if order >= 2 else None
    last = len(params.layers) - 1
    for idx, (w, b) in enumerate(params.layers):
        # contiguous transposed weight keeps the GEMM bitwise row-stable, so
        # batched evaluation matches a per-point loop exactly
        wt = w.t().contiguous()
        a = v @ wt + b
        a1 = d1 @ wt
        a2 = d2 @ wt if d2 is not None else None
        if idx == last:
            v, d1, d2 = a, a1, a2
        else:
            h = torch.tanh(a)
            hp = 1.0 - h * h
            v = h
            d1 = hp * a1
            if a2 is not None:
                d2 = hp * a2 - 2.0 * h * hp * a1 * a1
    return v, d1, d2


def forward_jet(params: SubnetParams, x: float) -> Jet:
    """Jet of the subnetwork at one scalar input."""
    return forward_jet_batch(params, [x])[0]


def forward_jet_batch(params: SubnetParams, xs: Sequence[float]) -> list[Jet]:
    """Jets at each input, in input order."""
    if len(xs) == 0:
        return []
    with torch.no_grad():
        x = torch.tensor(np.asarray(xs, dtype=np.float64))
        v, d1, d2 = jet_tensors(params, x)
    value = v.numpy()
    first = d1.numpy()
    second = d2.numpy()
    return [Jet(value[i].copy(), first[i].copy(), second[i].copy()) for i in range(len(xs))]


def parameter_gradient(
    objective: Callable[[], torch.Tensor],
    params: Sequence[SubnetParams],
) -> np.ndarray:
    """Exact gradient of a scalar objective w.r.t. every subnet parameter.

    ``objective`` must rebuild its value from the current parameter leaves so
    the tape covers the full computation (factor tables, Caputo sums, kernel
    sums). Returns a flat vector ordered subnet by subnet, layer by layer.
    """
    leaves = [t for p in params for t in p.tensors()]
    value = objective()
    if value.ndim != 0:
        raise ValueError("objective must be scalar")
    if not torch.isfinite(value):
        raise NumericError(f"objective evaluated to non-finite value {value.item()!r}")
    if value.grad_fn is None:
        return np.zeros(sum(t.numel() for t in leaves))
    grads = torch.autograd.grad(value, leaves, allow_unused=True)
    return flatten_gradients(grads, leaves)


def flatten_gradients(
    grads: Sequence[torch.Tensor | None], leaves: Sequence[torch.Tensor]
) -> np.ndarray:
    """Concatenate per-leaf gradients, reporting where non-finite values sit."""
    flat = []
    for i, (g, leaf) in enumerate(zip(grads, leaves)):
        if g is None:
            flat.append(np.zeros(leaf.numel()))
            continue
        arr = g.detach().numpy().ravel()
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise NumericError(
                f"non-finite gradient in parameter leaf {i} (shape {tuple(leaf.shape)}) at flat index {bad}"
            )
        flat.append(arr.copy())
    return np.concatenate(flat)
