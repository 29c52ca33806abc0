"""EOS halting masks and the straight-through mask feedback.

Once a generator emits EOS, every later hidden vector is zeroed before the
consumer sees it. The binary mask carries no gradient, so on its own the
generator never learns that emitting EOS throws away what follows. The
feedback keeps the hard mask in the forward pass but backpropagates as if the
multiplier had been its expectation ``E[m][i] = prod_{k<i} (1 - p_k)`` with
``p_k = P(O_k = EOS)``.
"""
from dataclasses import dataclass

import numpy as np
import torch

from .grad import straight_through


@dataclass
class MaskPair:
    hard: torch.Tensor  # (..., T) of 0/1
    expected: torch.Tensor  # (..., T) in [0, 1]


def compute_hard_mask(output_tokens, eos_index: int) -> torch.Tensor:
    """m[0] = 1; m[i] = 1 iff no EOS among O_0 .. O_{i-1}.

    The first EOS keeps its own position. Works on a single sequence or a
    batch (last axis is time).
    """
    tokens = torch.as_tensor(output_tokens)
    is_eos = (tokens == eos_index).to(torch.int64)
    seen_before = torch.cumsum(is_eos, dim=-1) - is_eos
    return (seen_before == 0).to(torch.float64 if tokens.dtype == torch.float64 else torch.float32)


def expected_mask(eos_probs) -> torch.Tensor:
    """``E[m][i] = prod_{k<i} (1 - p_k)``, differentiable in ``p``."""
    p = torch.as_tensor(eos_probs)
    if not torch.is_floating_point(p):
        p = p.to(torch.float64)
    if torch.any((p < 0) | (p > 1)) or torch.any(torch.isnan(p)):
        raise ValueError("EOS probabilities must lie in [0, 1]")
    survive = torch.cumprod(1 - p, dim=-1)
    ones = torch.ones_like(p[..., :1])
    return torch.cat([ones, survive[..., :-1]], dim=-1)


def sample_hard_masks(eos_probs, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` hard masks by halting at step k with probability p_k."""
    p = np.asarray(eos_probs, dtype=np.float64)
    halts = rng.random((n, p.size)) < p
    seen_before = np.cumsum(halts, axis=1) - halts
    return (seen_before == 0).astype(np.float64)


def apply_mask_feedback(vq_sequence: torch.Tensor, hard: torch.Tensor, eos_probs=None) -> torch.Tensor:
    """Mask a (..., T, d) sequence of quantized vectors.

    Forward is exactly ``hard * v_q``. When ``eos_probs`` is given the mask is
    ``straight_through(hard, E[m])`` so gradients reach the EOS probabilities;
    with ``eos_probs=None`` the hard mask alone is applied (no feedback).
    """
    T = vq_sequence.shape[-2]
    if hard.shape[-1] != T:
        raise ValueError(f"mask length {hard.shape[-1]} != sequence length {T}")
    hard = hard.to(vq_sequence.dtype)
    if eos_probs is None:
        mask = hard
    else:
        if eos_probs.shape[-1] != T:
            raise ValueError(f"EOS probability length {eos_probs.shape[-1]} != sequence length {T}")
        mask = straight_through(hard, expected_mask(eos_probs).to(vq_sequence.dtype))
    return vq_sequence * mask.unsqueeze(-1)


def effective_length(hard: torch.Tensor) -> torch.Tensor:
    """Number of unmasked hidden positions per row."""
    return hard.sum(dim=-1)
