"""Discrete bottlenecks: forward picks a row, backward follows a soft surrogate.

Run: python demos/01_bottlenecks.py
"""
import torch

from sigmae.bottleneck import gumbel_db, softmax_db, vq_db
from sigmae.grad import gradcheck

torch.manual_seed(0)
torch.set_default_dtype(torch.float64)

D = torch.randn(6, 4)            # dictionary: 6 rows of width 4
W = torch.nn.Linear(4, 6)        # projection used by the probability-based heads
v = torch.randn(3, 4, requires_grad=True)

# Softmax DB: index = argmax of the scores, v_q is exactly that row.
out = softmax_db(v, D, W)
print("scores\n", out.scores.detach().round(decimals=3))
print("index ", out.index.tolist())
print("v_q is a dictionary row:", torch.equal(out.quantized.detach(), D[out.index]))

# The gradient w.r.t. v is the gradient of the soft average s @ D.
# A loss linear in v_q keeps the outer gradient the same on both sides.
c = torch.randn(3, 4)
report = gradcheck(
    lambda x: (softmax_db(x, D, W).quantized * c).sum(),
    v.detach(),
    oracle_fn=lambda x: ((torch.softmax(W(x), -1) @ D) * c).sum(),
)
print(f"softmax DB vs soft-average oracle: max rel err {report.max_relative_error:.2e}")

# Gumbel DB with the noise frozen at zero is the softmax DB.
g0 = gumbel_db(v, D, W, noise=torch.zeros(()))
print("gumbel(noise=0) == softmax:", torch.equal(g0.index, out.index))
gen = torch.Generator().manual_seed(1)
print("gumbel samples:", [gumbel_db(v, D, W, generator=gen).index.tolist() for _ in range(3)])

# VQ DB: nearest row; the backward pass is the identity on v.
q = vq_db(v, D)
q.quantized.sum().backward()
print("vq index", q.index.tolist(), " dL/dv == dL/dv_q:", torch.equal(v.grad, torch.ones_like(v)))
