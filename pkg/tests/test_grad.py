import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sigmae.grad import (
    finite_difference_gradient,
    gradcheck,
    nll_loss,
    softmax,
    stop_gradient,
    straight_through,
)


def t(values, grad=False):
    return torch.tensor(values, dtype=torch.float64, requires_grad=grad)


def test_stop_gradient_forward_is_identity():
    assert stop_gradient(t([3.0, -1.0])).tolist() == [3.0, -1.0]


def test_stop_gradient_has_zero_gradient():
    x = t([3.0, -1.0], grad=True)
    (stop_gradient(x).sum() + 0 * x.sum()).backward()
    assert x.grad.tolist() == [0.0, 0.0]


def test_product_with_stopped_copy():
    # d/dx [x * sg(x)] = sg(x) = 2 at x = 2
    x = t([2.0], grad=True)
    (x * stop_gradient(x)).sum().backward()
    assert x.grad.item() == 2.0
    fd = finite_difference_gradient(lambda a: float(a[0] * 2.0), np.array([2.0]))
    assert fd[0] == pytest.approx(2.0, rel=1e-8)


def test_zeroed_sg_branch_changes_nothing():
    x = t([0.3, -1.2, 2.0], grad=True)
    (x**2 * stop_gradient(x.exp())).sum().backward()
    with_sg = x.grad.clone()
    x.grad = None
    (x**2 * x.exp().detach()).sum().backward()
    assert torch.equal(with_sg, x.grad)


def test_straight_through_forward_is_hard():
    hard = t([1.0, 0.0, 0.0])
    soft = t([0.7, 0.2, 0.1], grad=True)
    assert straight_through(hard, soft).tolist() == [1.0, 0.0, 0.0]


def test_straight_through_gradient_goes_to_soft_path():
    w = np.array([0.5, -2.0, 3.0])
    logits = np.array([0.1, 0.4, -0.3])
    hard = t([0.0, 1.0, 0.0])

    def loss(z):
        return (torch.tensor(w) * straight_through(hard, torch.softmax(z, 0))).sum()

    rep = gradcheck(loss, logits, oracle_fn=lambda z: (torch.tensor(w) * torch.softmax(z, 0)).sum())
    assert rep.max_relative_error < 1e-6


def test_straight_through_degenerate_case():
    soft = t([0.25, 0.75], grad=True)
    out = straight_through(soft.detach().clone(), soft)
    assert torch.equal(out, soft.detach())
    out.dot(t([2.0, 3.0])).backward()
    assert soft.grad.tolist() == [2.0, 3.0]


def test_straight_through_shape_mismatch():
    with pytest.raises(ValueError):
        straight_through(t([1.0, 0.0]), t([0.5, 0.3, 0.2]))


@given(
    arrays(np.float64, st.integers(1, 16), elements=st.floats(-50, 50)),
    arrays(np.float64, st.integers(1, 16), elements=st.floats(-50, 50)),
)
def test_straight_through_forward_bitwise(hard, soft):
    n = min(len(hard), len(soft))
    h, s = torch.tensor(hard[:n]), torch.tensor(soft[:n], requires_grad=True)
    assert torch.equal(straight_through(h, s), h)


@pytest.mark.parametrize(
    "logits, expected",
    [([0.0, 0.0], [0.5, 0.5]), ([math.log(2), 0.0], [2 / 3, 1 / 3]), ([1000.0, 0.0], [1.0, 0.0])],
)
def test_softmax_values(logits, expected):
    out = softmax(t(logits)).tolist()
    assert out == pytest.approx(expected, abs=1e-12)
    assert all(math.isfinite(v) for v in out)


@settings(max_examples=50)
@given(
    arrays(np.float64, st.integers(1, 16), elements=st.floats(-30, 30)),
    st.floats(-100, 100),
)
def test_softmax_sums_to_one_and_is_shift_invariant(v, c):
    a = softmax(torch.tensor(v))
    b = softmax(torch.tensor(v + c))
    assert abs(a.sum().item() - 1) < 1e-9
    assert torch.allclose(a, b, atol=1e-9, rtol=0)


@pytest.mark.parametrize(
    "s, target, expected",
    [([0.25, 0.75], 1, 0.28768207245178085), ([0.0, 1.0], 1, 0.0), ([0.5, 0.5], 0, math.log(2))],
)
def test_nll_loss(s, target, expected):
    assert nll_loss(t(s), target).item() == pytest.approx(expected, abs=1e-12)


def test_nll_loss_target_out_of_range():
    with pytest.raises(IndexError):
        nll_loss(t([0.5, 0.5]), 2)


def test_finite_difference_sum_of_squares():
    g = finite_difference_gradient(lambda x: float((x**2).sum()), np.array([1.0, 2.0]))
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-6)


def test_finite_difference_constant():
    g = finite_difference_gradient(lambda x: 3.0, np.array([1.0, -4.0, 0.5]))
    np.testing.assert_array_equal(g, 0.0)


def test_finite_difference_softmax_nll():
    def f(x):
        return float(nll_loss(softmax(torch.tensor(x)), 0))

    g = finite_difference_gradient(f, np.array([0.0, 0.0]))
    np.testing.assert_allclose(g, [-0.5, 0.5], atol=1e-6)


def test_finite_difference_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        finite_difference_gradient(lambda x: float("inf"), np.array([1.0]))


OPS = {
    "matmul": lambda x: (x.reshape(4, 4) @ torch.linspace(-1, 1, 16, dtype=torch.float64).reshape(4, 4)).sin().sum(),
    "add": lambda x: ((x + torch.arange(16, dtype=torch.float64)) ** 2).sum(),
    "tanh": lambda x: torch.tanh(x).pow(3).sum(),
    "relu_smooth": lambda x: torch.nn.functional.gelu(x).sum(),
    "embedding": lambda x: torch.nn.functional.embedding(torch.tensor([3, 1, 3]), x.reshape(4, 4)).pow(2).sum(),
    "layer_norm": lambda x: (torch.nn.functional.layer_norm(x.reshape(2, 8), (8,)) * torch.arange(8.0, dtype=torch.float64)).sum(),
    "softmax_nll": lambda x: nll_loss(softmax(x), 5),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_differences(name):
    rng = np.random.default_rng(sorted(OPS).index(name))
    for _ in range(5):
        rep = gradcheck(OPS[name], rng.normal(size=16))
        assert rep.max_relative_error < 1e-4, (name, rep)
        assert rep.max_relative_error >= 0
