"""Discrete bottleneck (DB) layers.

Every DB maps a model output vector ``v`` to a probability vector ``s`` over
a finite dictionary and a quantized vector ``v_q`` that is exactly one row of
the dictionary. They differ in how the row is picked and in which surrogate
carries the gradient back:

* softmax: ``s = softmax(W v)``, row ``argmax s``, gradient as if ``v_q``
  were the soft average ``sum_i s[i] D[i]``.
* gumbel: like softmax with Gumbel noise added to the logits before the
  softmax, so the argmax samples the categorical.
* vq: distances ``l[i] = ||v - D[i]||``, row ``argmin l``,
  ``s = softmax(-l)``, gradient copied from ``v_q`` to ``v`` unchanged.
"""
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .grad import stop_gradient, straight_through
from .vocab import Vocab

VARIANTS = ("softmax", "gumbel", "vq")


class Dictionary(nn.Module):
    """Trainable embedding table D (|V| x d) tied to a vocabulary.

    The same table is used as the DB dictionary of the model that emits this
    vocabulary and as the input embedding wherever the vocabulary is read.
    """

    def __init__(self, vocab: Vocab, dim: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.vocab = vocab
        self.embeddings = nn.Parameter(torch.randn(len(vocab), dim, generator=generator))

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self):
        return self.embeddings.shape[0]

    def lookup(self, ids: torch.Tensor) -> torch.Tensor:
        """Embedding rows for ``ids``; PAD maps to the zero vector."""
        emb = F.embedding(ids, self.embeddings)
        return emb * (ids != self.vocab.pad_id).unsqueeze(-1).to(emb.dtype)


@dataclass
class BottleneckOutput:
    scores: torch.Tensor  # s, (..., |V|)
    log_scores: torch.Tensor  # log s, computed stably
    quantized: torch.Tensor  # v_q, (..., d)
    index: torch.Tensor  # (...,) long
    distances: Optional[torch.Tensor] = None  # l, vq only
    aux_loss: Optional[torch.Tensor] = None


def gumbel_noise(shape, generator=None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    return gumbel_transform(u)


def gumbel_transform(u: torch.Tensor) -> torch.Tensor:
    """``g = -log(-log u)``; u is clamped away from 0 and 1."""
    tiny = torch.finfo(u.dtype).tiny
    u = u.clamp(tiny, 1.0 - torch.finfo(u.dtype).eps)
    return -torch.log(-torch.log(u))


def _ban(x, banned, fill):
    if banned is None:
        return x
    return x.masked_fill(banned, fill)


def _probability_db(logits, dictionary, banned=None):
    logits = _ban(logits, banned, float("-inf"))
    s = torch.softmax(logits, dim=-1)
    log_s = torch.log_softmax(logits, dim=-1)
    index = s.argmax(dim=-1)  # first maximal entry on ties
    hard = F.embedding(index, dictionary)
    soft = s @ dictionary
    return BottleneckOutput(s, log_s, straight_through(hard, soft), index)


def softmax_db(
    v, dictionary: torch.Tensor, projection, temperature: float = 1.0, banned=None
) -> BottleneckOutput:
    """Maximum-likelihood decoding; soft-average surrogate gradient.

    ``banned`` is an optional boolean row mask of dictionary entries that can
    never be emitted (their score is exactly zero).
    """
    return _probability_db(projection(v) / temperature, dictionary, banned)


def gumbel_db(
    v,
    dictionary: torch.Tensor,
    projection,
    generator: Optional[torch.Generator] = None,
    temperature: float = 1.0,
    noise: Optional[torch.Tensor] = None,
    banned=None,
) -> BottleneckOutput:
    """Categorical sampling through the Gumbel-max trick.

    ``noise`` overrides the sampled Gumbel perturbation (tests pass zeros).
    """
    logits = projection(v)
    if noise is None:
        noise = gumbel_noise(logits.shape, generator, logits.dtype)
    return _probability_db((logits + noise) / temperature, dictionary, banned)


def vq_db(v, dictionary: torch.Tensor, commitment: Optional[float] = None, banned=None) -> BottleneckOutput:
    """Nearest-neighbour quantization with an identity pass-through gradient.

    ``commitment`` switches on the VQ-VAE codebook and commitment terms in
    ``aux_loss``; off by default.
    """
    if v.shape[-1] != dictionary.shape[-1]:
        raise ValueError(f"vector dim {v.shape[-1]} != dictionary dim {dictionary.shape[-1]}")
    distances = torch.linalg.vector_norm(v.unsqueeze(-2) - dictionary, dim=-1)
    distances = _ban(distances, banned, float("inf"))
    index = distances.argmin(dim=-1)
    hard = F.embedding(index, dictionary)
    s = torch.softmax(-distances, dim=-1)
    log_s = torch.log_softmax(-distances, dim=-1)
    aux = None
    if commitment is not None:
        aux = F.mse_loss(hard, stop_gradient(v)) + commitment * F.mse_loss(v, stop_gradient(hard))
    return BottleneckOutput(s, log_s, straight_through(hard, v), index, distances, aux)


class DiscreteBottleneck(nn.Module):
    """DB head attached to a transducer, bound to the output dictionary."""

    def __init__(
        self,
        dictionary: Dictionary,
        variant: str = "softmax",
        model_dim: Optional[int] = None,
        temperature: float = 1.0,
        commitment: Optional[float] = None,
    ):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown DB variant {variant!r}; expected one of {VARIANTS}")
        self.variant = variant
        self.dictionary = dictionary
        self.temperature = temperature
        self.commitment = commitment
        self.generator: Optional[torch.Generator] = None
        # PAD and BOS are never emitted
        banned = torch.zeros(len(dictionary), dtype=torch.bool)
        banned[[dictionary.vocab.pad_id, dictionary.vocab.bos_id]] = True
        self.register_buffer("banned", banned, persistent=False)
        if variant == "vq":
            self.projection = None
        else:
            self.projection = nn.Linear(model_dim or dictionary.dim, len(dictionary))
            # near-zero logits: an untrained head scores the dictionary uniformly
            nn.init.normal_(self.projection.weight, std=0.02)
            nn.init.zeros_(self.projection.bias)

    def forward(self, v: torch.Tensor, greedy: Optional[bool] = None) -> BottleneckOutput:
        """Apply the DB. Gumbel noise is drawn only when not ``greedy``
        (default: greedy iff the module is in eval mode)."""
        D = self.dictionary.embeddings
        if self.variant == "softmax":
            return softmax_db(v, D, self.projection, self.temperature, self.banned)
        if self.variant == "gumbel":
            if greedy is None:
                greedy = not self.training
            noise = torch.zeros((), dtype=v.dtype) if greedy else None
            return gumbel_db(v, D, self.projection, self.generator, self.temperature, noise, self.banned)
        return vq_db(v, D, self.commitment, self.banned)
