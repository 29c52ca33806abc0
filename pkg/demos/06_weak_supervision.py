"""Ten percent parallel data: supervised-only versus joint training that also
uses the unpaired X and Z halves.

Run: python demos/06_weak_supervision.py [steps]
"""
import sys

import numpy as np

from sigmae import data
from sigmae.metrics import evaluate
from sigmae.training import Schedule, Trainer, run_schedule
from sigmae.transducer import PRESETS, ModelConfig, SymbolicAutoencoder

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
corpus = data.generate_mini_scan(2200, rng=0)
train, test = corpus.pairs[:2000], corpus.pairs[2000:]
split = data.split_corpus(data.ParallelCorpus(train, corpus.vocab_x, corpus.vocab_z), eta=0.1, seed=0)
sets = {"xz": split.xz, "x": split.x, "z": split.z}

for name, schedule in (("supervised only", Schedule.supervised_only()), ("joint", Schedule.joint())):
    cfg = ModelConfig(**PRESETS["small"], max_len_x=12, max_len_z=24)
    pair = SymbolicAutoencoder(corpus.vocab_x, corpus.vocab_z, cfg, seed=0)
    run_schedule(Trainer(pair), sets, schedule, np.random.default_rng(0), steps, 32)
    r = evaluate(pair, test, "xz")
    print(f"{name:16s} autoregressive Z TA {float(r.ar_token_acc):.4f}  SA {float(r.sentence_acc):.4f}")
