"""Surrogate-gradient primitives on top of torch autograd.

A ``DiffValue`` is simply a ``torch.Tensor`` taking part in the autograd
graph. The helpers here are the handful of operations the discrete
bottleneck and the EOS mask feedback are built from, plus a central
difference oracle used throughout the tests.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

DiffValue = torch.Tensor


def stop_gradient(x: DiffValue) -> DiffValue:
    """Identity in the forward pass, zero gradient in the backward pass."""
    return x.detach()


class _StraightThrough(torch.autograd.Function):
    # Forward returns ``hard`` untouched; backward hands the incoming gradient
    # to both inputs, which is what ``hard + soft - sg(soft)`` differentiates to.
    @staticmethod
    def forward(ctx, hard, soft):
        return hard.clone()

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output, grad_output


def straight_through(hard: DiffValue, soft: DiffValue) -> DiffValue:
    """Use ``hard`` in the forward pass and the gradient of ``soft`` backwards.

    Equivalent to ``hard + soft - stop_gradient(soft)`` except that the
    forward output is bitwise equal to ``hard`` (the arithmetic form can be
    off by one ulp).
    """
    if hard.shape != soft.shape:
        raise ValueError(f"shape mismatch: hard {tuple(hard.shape)} vs soft {tuple(soft.shape)}")
    return _StraightThrough.apply(hard, soft)


def softmax(v: DiffValue, axis: int = -1) -> DiffValue:
    # torch subtracts the running max internally
    return torch.softmax(v, dim=axis)


def nll_loss(s: DiffValue, target: int) -> DiffValue:
    """Negative log-likelihood ``-log s[target]`` of a probability vector."""
    n = s.shape[-1]
    if not 0 <= int(target) < n:
        raise IndexError(f"target {target} outside vocabulary of size {n}")
    return -torch.log(s[..., int(target)])


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6
) -> np.ndarray:
    """Central-difference estimate of the gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = float(f(x))
        flat[i] = old - eps
        lo = float(f(x))
        flat[i] = old
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(f"non-finite function value near coordinate {i}")
        out[i] = (hi - lo) / (2 * eps)
    return grad


@dataclass
class GradCheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_relative_error: float

    @property
    def ok(self) -> bool:
        return self.max_relative_error < 1e-4


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def gradcheck(
    loss_fn: Callable[[torch.Tensor], torch.Tensor],
    x: np.ndarray,
    oracle_fn: Callable[[torch.Tensor], torch.Tensor] | None = None,
    eps: float = 1e-5,
) -> GradCheckReport:
    """Compare the autograd gradient of ``loss_fn`` with finite differences.

    ``oracle_fn`` is differenced instead of ``loss_fn`` when given; this is how
    straight-through paths are checked against their declared soft surrogate.
    """
    x = np.asarray(x, dtype=np.float64)
    xt = torch.tensor(x, dtype=torch.float64, requires_grad=True)
    loss_fn(xt).backward()
    analytic = xt.grad.detach().numpy().copy()
    target = oracle_fn or loss_fn

    def f(arr):
        with torch.no_grad():
            return float(target(torch.tensor(arr, dtype=torch.float64)))

    numeric = finite_difference_gradient(f, x, eps)
    # absolute floor keeps near-zero coordinates from dominating the ratio
    return GradCheckReport(analytic, numeric, relative_error(analytic, numeric, floor=1e-3))
