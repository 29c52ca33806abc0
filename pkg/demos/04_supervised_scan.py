"""Supervised training on mini-SCAN in both directions (a few minutes on one core).

Run: python demos/04_supervised_scan.py [steps]
"""
import sys

import numpy as np

from sigmae import data
from sigmae.metrics import evaluate
from sigmae.training import Schedule, Trainer, run_schedule
from sigmae.transducer import ModelConfig, SymbolicAutoencoder

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
corpus = data.generate_mini_scan(2200, rng=0)
train, test = corpus.pairs[:2000], corpus.pairs[2000:]

pair = SymbolicAutoencoder(corpus.vocab_x, corpus.vocab_z, ModelConfig(max_len_x=12, max_len_z=24), seed=0)
trainer = Trainer(pair, lr=1e-3)


def report(step):
    for d in ("xz", "zx"):
        r = evaluate(pair, test, d)
        print(f"step {step:5d} {d}: teacher-forced TA {float(r.tf_token_acc):.4f}  "
              f"autoregressive TA {float(r.ar_token_acc):.4f}  SA {float(r.sentence_acc):.4f}")
    return {}


run_schedule(trainer, {"xz": train}, Schedule.supervised_only(), np.random.default_rng(0),
             steps, 32, report, eval_interval=500)

x = ["jump", "opposite", "left", "after", "walk", "twice"]
hidden = pair.m_xz.generate_tokens(__import__("sigmae").SequenceBatch.from_tokens([x], corpus.vocab_x))
print(" ".join(x), "->", " ".join(corpus.vocab_z.decode(hidden.rows()[0])))
