"""Experiment runner: ``sigmae generate | train | eval``.

Configuration comes from an optional JSON file (nested sections allowed) with
command-line flags taking precedence. A training run writes into its output
directory:

* ``config.json``   resolved configuration (re-running it reproduces the run)
* ``train_log.csv`` one row per step: step, mode, losses, hidden length, wall time
* ``eval_log.csv``  one EvalReport row per direction and evaluation
* ``test.tsv``      the held-out evaluation pairs
* ``checkpoint.bin`` final parameters
"""
import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import data
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import EvalReport, evaluate
from .training import MODES, Schedule, Trainer, run_schedule
from .transducer import PRESETS, ModelConfig, SymbolicAutoencoder
from .vocab import Vocab

TASKS = ("mini-scan", "mini-pcfg-set", "copy")
SCHEDULES = ("joint", "supervised", "unsup-then-sup", "sup-then-unsup")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "mini-scan"
    train_file: Optional[str] = None  # parallel TSV; replaces the generated task when set
    test_file: Optional[str] = None
    size: int = 2000
    test_size: int = 200
    pcfg_depth: int = 2
    db: str = "softmax"
    eta: float = 1.0
    schedule: dict = field(default_factory=lambda: {"name": "joint"})
    model: dict = field(default_factory=lambda: {"preset": "small"})
    lr: float = 1e-3
    batch_size: int = 32
    feedback: bool = True
    seed: int = 0
    steps: int = 2000
    eval_interval: int = 500
    patience: int = 10
    out: str = "runs/default"

    def validate(self) -> None:
        errors = []
        if self.train_file is None and self.task not in TASKS:
            errors.append(f"task must be one of {TASKS} or a train_file must be given")
        for f in (self.train_file, self.test_file):
            if f is not None and not Path(f).is_file():
                errors.append(f"file not found: {f}")
        if not 0.0 <= self.eta <= 1.0:
            errors.append(f"eta must lie in [0, 1], got {self.eta}")
        if self.steps <= 0:
            errors.append("steps must be > 0")
        if self.db not in ("softmax", "gumbel", "vq"):
            errors.append(f"db must be softmax, gumbel or vq, got {self.db!r}")
        name = self.schedule.get("name")
        if "probs" not in self.schedule and name not in SCHEDULES:
            errors.append(f"schedule name must be one of {SCHEDULES} (or give 'probs')")
        if self.model.get("preset", "small") not in PRESETS:
            errors.append(f"unknown model preset {self.model.get('preset')!r}")
        if errors:
            raise ConfigError("; ".join(errors))

    def model_config(self, max_len_x: int, max_len_z: int) -> ModelConfig:
        spec = dict(self.model)
        base = dict(PRESETS[spec.pop("preset", "small")])
        base.update(spec)
        base.setdefault("max_len_x", max_len_x)
        base.setdefault("max_len_z", max_len_z)
        return ModelConfig(db=self.db, **base)


def load_config(path: Optional[str], overrides: dict) -> ExperimentConfig:
    raw = {}
    if path:
        raw = json.loads(Path(path).read_text())
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**raw)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "schedule":
            cfg.schedule = {**cfg.schedule, "name": value}
            cfg.schedule.pop("probs", None)
        else:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def build_corpus(cfg: ExperimentConfig):
    """Return (train pairs, test pairs, vocab_x, vocab_z)."""
    if cfg.train_file:
        train = data.read_parallel(cfg.train_file)
        test = data.read_parallel(cfg.test_file) if cfg.test_file else []
        every = data.ParallelCorpus(train + test)
        return train, test, every.vocab_x, every.vocab_z
    total = cfg.size + cfg.test_size
    if cfg.task == "mini-scan":
        corpus = data.generate_mini_scan(total, cfg.seed)
    elif cfg.task == "mini-pcfg-set":
        corpus = data.generate_mini_pcfg_set(total, cfg.pcfg_depth, cfg.seed)
    else:
        corpus = data.generate_copy_task(total, cfg.seed)
    return corpus.pairs[: cfg.size], corpus.pairs[cfg.size :], corpus.vocab_x, corpus.vocab_z


def build_schedule(cfg: ExperimentConfig, sizes: dict) -> Schedule:
    spec = cfg.schedule
    if "probs" in spec:
        sched = Schedule(spec["probs"], spec.get("end"), spec.get("window", 0), spec.get("shift_start", 0))
    else:
        sched = Schedule.named(spec["name"], sizes, spec.get("window", 1000), spec.get("shift_start"))
    keys = {"supervised": "xz", "x_recon": "x", "z_recon": "z"}
    for mode in sched.support:
        if sizes[mode] == 0:
            raise ConfigError(f"schedule uses mode {mode!r} but D_{keys[mode]} is empty (eta={cfg.eta})")
    return sched


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, header)
        w.writeheader()
        w.writerows(rows)


def cmd_generate(task: str, size: int, seed: int, out_dir, eta: Optional[float] = None, depth: int = 2) -> dict:
    if task == "mini-scan":
        corpus = data.generate_mini_scan(size, seed)
    elif task == "mini-pcfg-set":
        corpus = data.generate_mini_pcfg_set(size, depth, seed)
    elif task == "copy":
        corpus = data.generate_copy_task(size, seed)
    else:
        raise ConfigError(f"unknown task {task!r}")
    splits = {"corpus": corpus.pairs}
    if eta is not None:
        sp = data.split_corpus(corpus, eta, seed)
        splits.update({"train_xz": sp.xz, "train_x": sp.x, "train_z": sp.z})
    try:
        return data.write_corpus_dir(out_dir, corpus, splits)
    except OSError as err:
        raise ConfigError(f"cannot write to {out_dir}: {err}") from err


def cmd_train(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    cfg.validate()
    torch.manual_seed(cfg.seed)
    train, test, vocab_x, vocab_z = build_corpus(cfg)
    split = data.split_corpus(data.ParallelCorpus(train, vocab_x, vocab_z), cfg.eta, cfg.seed)
    sizes = {"supervised": len(split.xz), "x_recon": len(split.x), "z_recon": len(split.z)}
    schedule = build_schedule(cfg, sizes)
    every = train + test
    max_x = max(len(x) for x, _ in every) + 1
    max_z = max(len(z) for _, z in every) + 1
    pair = SymbolicAutoencoder(vocab_x, vocab_z, cfg.model_config(max_x, max_z), seed=cfg.seed)
    trainer = Trainer(pair, lr=cfg.lr, feedback=cfg.feedback)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")
    eval_pairs = test or split.xz or train
    data.write_parallel(out / "test.tsv", eval_pairs)
    eval_rows = []

    def eval_fn(step):
        metrics = {}
        for direction in ("xz", "zx"):
            rep = evaluate(pair, eval_pairs, direction)
            eval_rows.append({"step": step, **rep.row()})
            metrics[direction] = rep
        if not quiet:
            print(f"step {step}: " + "  ".join(
                f"{d} tfTA={float(r.tf_token_acc):.3f} arTA={float(r.ar_token_acc):.3f} "
                f"SA={float(r.sentence_acc):.3f} recSA={float(r.recon_sentence_acc):.3f}"
                for d, r in metrics.items()), flush=True)
        return metrics

    log = run_schedule(
        trainer,
        {"xz": split.xz, "x": split.x, "z": split.z},
        schedule,
        np.random.default_rng(cfg.seed),
        cfg.steps,
        cfg.batch_size,
        eval_fn=eval_fn,
        eval_interval=cfg.eval_interval,
        patience=cfg.patience,
    )
    if not log.evals or log.evals[-1]["step"] != cfg.steps:
        eval_fn(cfg.steps)
    log.write_csv(out / "train_log.csv")
    _write_rows(out / "eval_log.csv", ["step"] + EvalReport.header(), eval_rows)
    save_checkpoint(pair, out / "checkpoint.bin", meta={"seed": cfg.seed, "steps": cfg.steps})
    return out


def cmd_eval(checkpoint, corpus, direction: str = "xz") -> EvalReport:
    pair, _ = load_checkpoint(checkpoint)
    pairs = data.read_parallel(corpus)
    for x, z in pairs:
        for tok in x:
            if tok not in pair.vocab_x:
                raise ConfigError(f"X token {tok!r} not in the checkpoint vocabulary")
        for tok in z:
            if tok not in pair.vocab_z:
                raise ConfigError(f"Z token {tok!r} not in the checkpoint vocabulary")
    folder = Path(corpus).parent
    for name, vocab in (("vocab_x.txt", pair.vocab_x), ("vocab_z.txt", pair.vocab_z)):
        if (folder / name).is_file() and Vocab.load(folder / name) != vocab:
            raise ConfigError(f"{folder / name} does not match the checkpoint vocabulary")
    return evaluate(pair, pairs, direction)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sigmae", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus and vocabularies")
    g.add_argument("--task", choices=TASKS, default="mini-scan")
    g.add_argument("--size", type=int, default=2000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--eta", type=float, help="also write the D_xz / D_x / D_z split")
    g.add_argument("--depth", type=int, default=2, help="PCFG nesting depth")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model pair under a schedule")
    t.add_argument("--config")
    t.add_argument("--task", choices=TASKS)
    t.add_argument("--seed", type=int)
    t.add_argument("--eta", type=float)
    t.add_argument("--db", choices=("softmax", "gumbel", "vq"))
    t.add_argument("--schedule", choices=SCHEDULES)
    t.add_argument("--steps", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--eval-interval", type=int, dest="eval_interval")
    t.add_argument("--no-feedback", action="store_const", const=False, dest="feedback")
    t.add_argument("--out")
    t.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a parallel TSV file")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--direction", choices=("xz", "zx"), default="xz")
    e.add_argument("--csv", help="also write the report as a one-row CSV")

    args = ap.parse_args(argv)
    try:
        if args.command == "generate":
            written = cmd_generate(args.task, args.size, args.seed, args.out, args.eta, args.depth)
            for name, path in written.items():
                print(f"{name}: {path}")
        elif args.command == "train":
            overrides = {k: getattr(args, k) for k in
                         ("task", "seed", "eta", "db", "schedule", "steps", "lr", "eval_interval", "feedback", "out")}
            cfg = load_config(args.config, overrides)
            out = cmd_train(cfg, quiet=args.quiet)
            print(f"run written to {out}")
        else:
            report = cmd_eval(args.checkpoint, args.corpus, args.direction)
            print(report)
            writer = csv.DictWriter(sys.stdout, EvalReport.header())
            writer.writeheader()
            writer.writerow(report.row())
            if args.csv:
                _write_rows(args.csv, EvalReport.header(), [report.row()])
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
