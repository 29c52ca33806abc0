"""Unsupervised z -> x -> z reconstruction on a copy task, with and without
EOS-mask feedback. The hidden sequence is discrete; only quantized vectors
and the mask reach the second model.

Run: python demos/05_copy_reconstruction.py [steps]
"""
import sys

import numpy as np

from sigmae.data import generate_copy_task
from sigmae.metrics import evaluate
from sigmae.training import Schedule, Trainer, run_schedule
from sigmae.transducer import PRESETS, ModelConfig, SymbolicAutoencoder

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
# all 39 strings of length 1-3 over {a, b, c}
corpus = generate_copy_task(39, 0, symbols=3, max_len=3)
zs = corpus.zs

for feedback in (True, False):
    cfg = ModelConfig(**PRESETS["small"], max_len_x=6, max_len_z=4)
    pair = SymbolicAutoencoder(corpus.vocab_x, corpus.vocab_z, cfg, seed=0)
    trainer = Trainer(pair, lr=3e-4, feedback=feedback)
    log = run_schedule(trainer, {"z": zs}, Schedule((0, 0, 1)), np.random.default_rng(0), steps, len(zs))
    r = evaluate(pair, corpus.pairs, "xz")
    print(f"feedback={feedback}: mean hidden length {log.mean_hidden_length():.2f}, "
          f"reconstruction SA {float(r.recon_sentence_acc):.3f}")
