"""Losses, training modes and scheduling.

Three modes share one optimizer over both transducers:

* ``supervised``: teacher-forced NLL in both directions on parallel pairs
  (``l_xz`` and ``l_zx``).
* ``x_recon``: X -> hidden Z -> X; the hidden sequence is the quantized output
  of ``m_xz`` and ``m_zx`` reconstructs X from it (``l_xzx``).
* ``z_recon``: the mirror image (``l_zxz``).

A ``Schedule`` holds the probabilities of the three-sided coin that picks the
mode of each step, optionally moving linearly from a start to an end vector.
"""
import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .masking import apply_mask_feedback, compute_hard_mask, effective_length
from .transducer import SequenceBatch, SymbolicAutoencoder, TransducerModel
from .vocab import EOS_ID, PAD_ID

MODES = ("supervised", "x_recon", "z_recon")
LOSS_NAMES = ("l_xz", "l_zx", "l_xzx", "l_zxz")


@dataclass
class LossBundle:
    l_xz: Optional[torch.Tensor] = None
    l_zx: Optional[torch.Tensor] = None
    l_xzx: Optional[torch.Tensor] = None
    l_zxz: Optional[torch.Tensor] = None
    hidden_length: Optional[float] = None  # mean effective hidden length (reconstruction only)

    def present(self) -> dict[str, torch.Tensor]:
        return {k: getattr(self, k) for k in LOSS_NAMES if getattr(self, k) is not None}

    def total(self) -> torch.Tensor:
        return sum(self.present().values())

    def floats(self) -> dict[str, float]:
        return {k: float(v.detach()) for k, v in self.present().items()}


def sequence_nll(log_scores: torch.Tensor, gold: SequenceBatch) -> torch.Tensor:
    """Mean NLL over the non-PAD gold positions of the batch."""
    return F.nll_loss(log_scores.transpose(1, 2), gold.ids, ignore_index=PAD_ID)


def reconstruction_loss(
    generator: TransducerModel, reconstructor: TransducerModel, batch: SequenceBatch, feedback: bool = True
):
    """Run ``batch`` through the generator's discrete hidden sequence and score
    the reconstructor on getting ``batch`` back.

    Returns (loss, hard mask, generator output). Only quantized vectors and
    the mask cross between the two models.
    """
    hidden, eos_probs = generator.generate_quantized(batch)
    hard = compute_hard_mask(hidden.index, EOS_ID)
    masked = apply_mask_feedback(hidden.quantized, hard, eos_probs if feedback else None)
    out = reconstructor.forward_teacher_forced(masked, batch)
    loss = sequence_nll(out.log_scores, batch)
    return loss, hard, hidden


class Trainer:
    """Holds the model pair and its optimizer; each step is one update."""

    def __init__(
        self,
        pair: SymbolicAutoencoder,
        lr: float = 1e-3,
        feedback: bool = True,
        grad_clip: Optional[float] = 1.0,
    ):
        self.pair = pair
        self.feedback = feedback
        self.grad_clip = grad_clip
        self.optimizer = torch.optim.Adam(pair.parameters(), lr=lr)

    def _update(self, bundle: LossBundle, aux=()) -> LossBundle:
        loss = bundle.total()
        for a in aux:
            if a is not None:
                loss = loss + a
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if self.grad_clip:
            torch.nn.utils.clip_grad_norm_(self.pair.parameters(), self.grad_clip)
        self.optimizer.step()
        return bundle

    def batches(self, pairs=None, xs=None, zs=None):
        vx, vz = self.pair.vocab_x, self.pair.vocab_z
        if pairs is not None:
            if not pairs:
                raise ValueError("empty batch")
            return (SequenceBatch.from_tokens([p[0] for p in pairs], vx, "x"),
                    SequenceBatch.from_tokens([p[1] for p in pairs], vz, "z"))
        if xs is not None:
            return SequenceBatch.from_tokens(xs, vx, "x")
        return SequenceBatch.from_tokens(zs, vz, "z")

    def supervised_step(self, pairs) -> LossBundle:
        x, z = self.batches(pairs=pairs)
        out_z = self.pair.m_xz.forward_teacher_forced(x, z)
        out_x = self.pair.m_zx.forward_teacher_forced(z, x)
        bundle = LossBundle(l_xz=sequence_nll(out_z.log_scores, z), l_zx=sequence_nll(out_x.log_scores, x))
        return self._update(bundle, (out_z.aux_loss, out_x.aux_loss))

    def z_reconstruction_step(self, zs) -> LossBundle:
        z = self.batches(zs=zs)
        loss, hard, hidden = reconstruction_loss(self.pair.m_zx, self.pair.m_xz, z, self.feedback)
        bundle = LossBundle(l_zxz=loss, hidden_length=float(effective_length(hard).mean()))
        return self._update(bundle, (hidden.aux_loss,))

    def x_reconstruction_step(self, xs) -> LossBundle:
        x = self.batches(xs=xs)
        loss, hard, hidden = reconstruction_loss(self.pair.m_xz, self.pair.m_zx, x, self.feedback)
        bundle = LossBundle(l_xzx=loss, hidden_length=float(effective_length(hard).mean()))
        return self._update(bundle, (hidden.aux_loss,))

    def step(self, mode: str, batch) -> LossBundle:
        if mode == "supervised":
            return self.supervised_step(batch)
        if mode == "x_recon":
            return self.x_reconstruction_step(batch)
        if mode == "z_recon":
            return self.z_reconstruction_step(batch)
        raise ValueError(f"unknown mode {mode!r}")


def _check_probs(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must be 3 nonnegative probabilities summing to 1, got {p.tolist()}")
    return p


@dataclass
class Schedule:
    """Probabilities over (supervised, x_recon, z_recon).

    The vector equals ``start`` until ``shift_start``, then moves linearly to
    ``end`` over ``window`` steps and stays there. ``shift_start=None`` means
    the shift begins once training on the start distribution has converged.
    """

    start: Sequence[float]
    end: Optional[Sequence[float]] = None
    window: int = 0
    shift_start: Optional[int] = 0

    def __post_init__(self):
        self.start = _check_probs(self.start, "start")
        self.end = self.start if self.end is None else _check_probs(self.end, "end")
        if self.window < 0:
            raise ValueError("window must be >= 0")

    @property
    def support(self) -> set[str]:
        return {m for m, a, b in zip(MODES, self.start, self.end) if a > 0 or b > 0}

    def probabilities(self, step: int) -> np.ndarray:
        if self.shift_start is None or step <= self.shift_start:
            return self.start.copy()
        if self.window == 0 or step >= self.shift_start + self.window:
            return self.end.copy()
        frac = (step - self.shift_start) / self.window
        return (1 - frac) * self.start + frac * self.end

    @classmethod
    def joint(cls, sizes: Optional[dict] = None, proportional: bool = False) -> "Schedule":
        """Fair coin over the modes whose data is non-empty (or proportional
        to the dataset sizes)."""
        sizes = sizes or {m: 1 for m in MODES}
        w = np.array([float(sizes.get(m, 0) > 0) * (sizes.get(m, 0) if proportional else 1) for m in MODES])
        if w.sum() == 0:
            raise ValueError("no data for any mode")
        return cls(w / w.sum())

    @classmethod
    def supervised_only(cls) -> "Schedule":
        return cls((1.0, 0.0, 0.0))

    @classmethod
    def unsup_then_sup(cls, window: int = 1000, shift_start: Optional[int] = None) -> "Schedule":
        return cls((0.0, 0.5, 0.5), (1.0, 0.0, 0.0), window, shift_start)

    @classmethod
    def sup_then_unsup(cls, window: int = 1000, shift_start: Optional[int] = None) -> "Schedule":
        return cls((1.0, 0.0, 0.0), (0.0, 0.5, 0.5), window, shift_start)

    @classmethod
    def named(cls, name: str, sizes=None, window=1000, shift_start=None) -> "Schedule":
        if name == "joint":
            return cls.joint(sizes)
        if name == "supervised":
            return cls.supervised_only()
        if name == "unsup-then-sup":
            return cls.unsup_then_sup(window, shift_start)
        if name == "sup-then-unsup":
            return cls.sup_then_unsup(window, shift_start)
        raise ValueError(f"unknown schedule {name!r}")


class _Cycler:
    """Endless reshuffled pass over a list, driven by the run's rng."""

    def __init__(self, items, rng: np.random.Generator):
        self.items, self.rng = list(items), rng
        self.order, self.pos = None, 0

    def take(self, n):
        out = []
        while len(out) < n:
            if self.order is None or self.pos >= len(self.order):
                self.order, self.pos = self.rng.permutation(len(self.items)), 0
            k = min(n - len(out), len(self.order) - self.pos)
            out += [self.items[i] for i in self.order[self.pos : self.pos + k]]
            self.pos += k
        return out


LOG_FIELDS = ("step", "mode") + LOSS_NAMES + ("hidden_length", "wall_time")


@dataclass
class TrainingLog:
    rows: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    converged_at: Optional[int] = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, LOG_FIELDS)
            w.writeheader()
            w.writerows(self.rows)

    def mean_hidden_length(self, last: int = 100) -> float:
        vals = [float(r["hidden_length"]) for r in self.rows if r["hidden_length"] != ""][-last:]
        return float(np.mean(vals)) if vals else float("nan")


def run_schedule(
    trainer: Trainer,
    datasets: dict,
    schedule: Schedule,
    rng: np.random.Generator,
    steps: int,
    batch_size: int = 32,
    eval_fn: Optional[Callable[[int], dict]] = None,
    eval_interval: int = 500,
    patience: int = 10,
    stop_fn: Optional[Callable[[dict], bool]] = None,
    row_callback: Optional[Callable[[dict], None]] = None,
) -> TrainingLog:
    """Train for ``steps`` steps, drawing each step's mode from the schedule.

    ``datasets`` maps ``xz`` to parallel pairs and ``x`` / ``z`` to single-sided
    sequences. ``eval_fn(step)`` runs every ``eval_interval`` steps and returns a
    dict of metrics; a ``val_loss`` entry drives convergence detection for a
    schedule with ``shift_start=None`` (no improvement for ``patience``
    evaluations). ``stop_fn`` may end training early given the eval dict.
    """
    keys = {"supervised": "xz", "x_recon": "x", "z_recon": "z"}
    for mode in schedule.support:
        if not datasets.get(keys[mode]):
            raise ValueError(f"schedule gives mode {mode!r} nonzero probability but D_{keys[mode]} is empty")
    if steps <= 0:
        raise ValueError("steps must be positive")
    cyclers = {m: _Cycler(datasets[keys[m]], rng) for m in schedule.support}
    log = TrainingLog()
    best, stale = float("inf"), 0
    t0 = time.perf_counter()
    trainer.pair.train()
    for step in range(1, steps + 1):
        probs = schedule.probabilities(step)
        mode = MODES[rng.choice(3, p=probs / probs.sum())]
        bundle = trainer.step(mode, cyclers[mode].take(batch_size))
        row = {"step": step, "mode": mode, **{k: "" for k in LOSS_NAMES}, "hidden_length": ""}
        row.update({k: f"{v:.6f}" for k, v in bundle.floats().items()})
        if bundle.hidden_length is not None:
            row["hidden_length"] = f"{bundle.hidden_length:.4f}"
        row["wall_time"] = f"{time.perf_counter() - t0:.3f}"
        log.rows.append(row)
        if row_callback:
            row_callback(row)
        if eval_fn and step % eval_interval == 0:
            metrics = {"step": step, **eval_fn(step)}
            trainer.pair.train()
            log.evals.append(metrics)
            if schedule.shift_start is None and "val_loss" in metrics:
                if metrics["val_loss"] < best - 1e-4:
                    best, stale = metrics["val_loss"], 0
                else:
                    stale += 1
                if stale >= patience:
                    schedule.shift_start = step
                    log.converged_at = step
            if stop_fn and stop_fn(metrics):
                break
    return log
