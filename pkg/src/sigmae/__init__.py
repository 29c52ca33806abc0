"""Discrete-bottleneck sequence autoencoders.

Two transformer transducers, X->Z and Z->X, each end in a discrete bottleneck
that picks one dictionary row per step. Joining them through the hidden token
stream gives reconstruction losses (X->Z->X and Z->X->Z) that train both
models from unpaired data, alongside ordinary supervised training on pairs.

Submodules
----------
grad        straight-through estimator, finite-difference checks
bottleneck  Softmax, Gumbel and VQ discrete bottlenecks
masking     EOS masks and their differentiable expectation
transducer  transformer transducers and the coupled model pair
training    losses, training steps, mode schedules
data        mini-SCAN, mini-PCFG SET, copy task, corpus splits and files
metrics     token / sentence / reconstruction accuracy
checkpoint  binary parameter files
cli         ``python -m sigmae`` experiment runner
"""
from .bottleneck import BottleneckOutput, Dictionary, DiscreteBottleneck, gumbel_db, softmax_db, vq_db
from .grad import finite_difference_gradient, gradcheck, nll_loss, softmax, stop_gradient, straight_through
from .masking import apply_mask_feedback, compute_hard_mask, effective_length, expected_mask
from .metrics import EvalReport, evaluate, reconstruction_accuracy, sentence_accuracy, token_accuracy
from .training import LossBundle, Schedule, Trainer, run_schedule
from .transducer import ModelConfig, PRESETS, SequenceBatch, SymbolicAutoencoder, TransducerModel
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocab

__version__ = "0.1.0"
