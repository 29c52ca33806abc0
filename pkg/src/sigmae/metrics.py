"""Token and sentence accuracy in teacher-forced, autoregressive and
reconstruction regimes.

Accuracies are exact ``Fraction`` objects. EOS counts as a scored position.
When an autoregressive prediction and its gold sequence differ in length, the
missing positions and the surplus positions are both scored as wrong.
"""
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Sequence

import torch

from .transducer import SequenceBatch, SymbolicAutoencoder, TransducerModel

REGIMES = ("teacher-forced", "autoregressive")


def _rows(batch) -> list[list[int]]:
    if isinstance(batch, SequenceBatch):
        return batch.rows()
    return [list(map(int, r)) for r in batch]


def _token_counts(pred, gold, regime="autoregressive") -> tuple[int, int]:
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    P, G = _rows(pred), _rows(gold)
    if len(P) != len(G):
        raise ValueError("prediction and gold batches differ in size")
    correct = total = 0
    for p, g in zip(P, G):
        if regime == "teacher-forced" and len(p) != len(g):
            raise ValueError("teacher-forced predictions must align with gold")
        correct += sum(a == b for a, b in zip(p, g))
        total += max(len(p), len(g))
    return correct, total


def token_accuracy(pred, gold, regime: str = "autoregressive") -> Fraction:
    correct, total = _token_counts(pred, gold, regime)
    if total == 0:
        raise ValueError("empty gold batch")
    return Fraction(correct, total)


def sentence_accuracy(pred, gold) -> Fraction:
    P, G = _rows(pred), _rows(gold)
    if not G:
        raise ValueError("empty gold batch")
    if len(P) != len(G):
        raise ValueError("prediction and gold batches differ in size")
    return Fraction(sum(p == g for p, g in zip(P, G)), len(G))


@torch.no_grad()
def teacher_forced_predictions(model: TransducerModel, source, gold: SequenceBatch) -> SequenceBatch:
    out = model.forward_teacher_forced(source, gold, greedy=True)
    rows = [out.index[i, : int(n)].tolist() for i, n in enumerate(gold.lengths)]
    return SequenceBatch.from_ids(rows)


@torch.no_grad()
def reconstruction_accuracy(m_first: TransducerModel, m_second: TransducerModel, batch: SequenceBatch):
    """Map ``batch`` through ``m_first`` and back through ``m_second`` greedily;
    return (token accuracy, sentence accuracy) of the round trip."""
    hidden = m_first.generate_tokens(batch)
    recon = m_second.generate_tokens(hidden)
    return token_accuracy(recon, batch), sentence_accuracy(recon, batch)


@dataclass
class EvalReport:
    direction: str
    tf_token_acc: Fraction
    ar_token_acc: Fraction
    sentence_acc: Fraction
    recon_token_acc: Fraction
    recon_sentence_acc: Fraction
    tokens_tf: int
    tokens_ar: int
    sentences: int
    tokens_recon: int

    FLOAT_FIELDS = ("tf_token_acc", "ar_token_acc", "sentence_acc", "recon_token_acc", "recon_sentence_acc")

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = f"{float(v):.6f}" if isinstance(v, Fraction) else v
        return out

    def __str__(self):
        src, tgt = self.direction[0].upper(), self.direction[1].upper()
        return "\n".join([
            f"direction {src}->{tgt}",
            f"  teacher-forced {tgt} token acc : {float(self.tf_token_acc):.4f} ({self.tokens_tf} tokens)",
            f"  autoregressive {tgt} token acc : {float(self.ar_token_acc):.4f} ({self.tokens_ar} tokens)",
            f"  {tgt} sentence acc             : {float(self.sentence_acc):.4f} ({self.sentences} sentences)",
            f"  reconstruction {tgt} token acc : {float(self.recon_token_acc):.4f}",
            f"  reconstruction {tgt} sent. acc : {float(self.recon_sentence_acc):.4f}",
        ])


@torch.no_grad()
def evaluate(
    pair: SymbolicAutoencoder,
    pairs: Sequence[tuple[list[str], list[str]]],
    direction: str = "xz",
    batch_size: int = 256,
) -> EvalReport:
    """Full report for the ``direction`` model on parallel ``pairs``.

    For ``xz`` the target is Z; reconstruction runs Z -> X^ -> Z^. ``zx`` is the
    mirror image.
    """
    if not pairs:
        raise ValueError("no evaluation pairs")
    was_training = pair.training
    pair.eval()
    model = pair.model(direction)
    back = pair.model(direction[::-1])
    if direction == "xz":
        vs, vt = pair.vocab_x, pair.vocab_z
        srcs, tgts = [p[0] for p in pairs], [p[1] for p in pairs]
    else:
        vs, vt = pair.vocab_z, pair.vocab_x
        srcs, tgts = [p[1] for p in pairs], [p[0] for p in pairs]
    c = {"tf": [0, 0], "ar": [0, 0], "sa": [0, 0], "rt": [0, 0], "rs": [0, 0]}
    for i in range(0, len(pairs), batch_size):
        src = SequenceBatch.from_tokens(srcs[i : i + batch_size], vs)
        gold = SequenceBatch.from_tokens(tgts[i : i + batch_size], vt)
        tf = teacher_forced_predictions(model, src, gold)
        ar = model.generate_tokens(src)
        hidden = back.generate_tokens(gold)
        recon = model.generate_tokens(hidden)
        for key, (pred, kind) in {
            "tf": (tf, "teacher-forced"), "ar": (ar, "autoregressive"), "rt": (recon, "autoregressive"),
        }.items():
            a, b = _token_counts(pred, gold, kind)
            c[key][0] += a
            c[key][1] += b
        for key, pred in (("sa", ar), ("rs", recon)):
            c[key][0] += sum(p == g for p, g in zip(pred.rows(), gold.rows()))
            c[key][1] += len(gold)
    pair.train(was_training)
    frac = {k: Fraction(a, b) for k, (a, b) in c.items()}
    return EvalReport(
        direction, frac["tf"], frac["ar"], frac["sa"], frac["rt"], frac["rs"],
        c["tf"][1], c["ar"][1], c["sa"][1], c["rt"][1],
    )
