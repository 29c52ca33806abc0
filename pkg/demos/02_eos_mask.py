"""EOS masking: the hard mask halts the hidden sequence, its expectation
carries gradient to the EOS probabilities.

Run: python demos/02_eos_mask.py
"""
import numpy as np
import torch

from sigmae.masking import apply_mask_feedback, compute_hard_mask, expected_mask, sample_hard_masks

EOS = 2
tokens = torch.tensor([[5, 7, EOS, 9, 4], [EOS, 3, 3, 3, 3], [6, 6, 6, 6, 6]])
print("hard masks\n", compute_hard_mask(tokens, EOS))
# position 0 is always kept and the first EOS keeps its own slot

p = torch.tensor([0.1, 0.5, 0.2, 0.9], dtype=torch.float64)
print("E[m]          ", expected_mask(p).numpy().round(4))
mc = sample_hard_masks(p.numpy(), 100_000, np.random.default_rng(0)).mean(axis=0)
print("Monte-Carlo   ", mc.round(4))

# Forward: exactly the hard mask. Backward: through E[m].
p = p.clone().requires_grad_(True)
vq = torch.ones(4, 3, dtype=torch.float64)
hard = torch.tensor([1.0, 1.0, 0.0, 0.0], dtype=torch.float64)
masked = apply_mask_feedback(vq, hard, p)
print("masked rows   ", masked.detach().sum(-1).tolist())
masked.sum().backward()
print("d/dp          ", p.grad.numpy().round(4), "(raising any EOS prob cuts later content)")
