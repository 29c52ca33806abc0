import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from sigmae.grad import finite_difference_gradient
from sigmae.masking import (
    apply_mask_feedback,
    compute_hard_mask,
    effective_length,
    expected_mask,
    sample_hard_masks,
)

EOS = 2
A, B = 5, 6


@pytest.mark.parametrize(
    "tokens, expected",
    [([A, EOS, B], [1, 1, 0]), ([A, B, A, B], [1, 1, 1, 1]), ([EOS, A, B, A], [1, 0, 0, 0]), ([A, EOS, EOS, B], [1, 1, 0, 0])],
)
def test_hard_mask(tokens, expected):
    assert compute_hard_mask(torch.tensor(tokens), EOS).tolist() == expected


def test_hard_mask_batched():
    m = compute_hard_mask(torch.tensor([[A, EOS, B], [EOS, A, A]]), EOS)
    assert m.tolist() == [[1, 1, 0], [1, 0, 0]]
    assert effective_length(m).tolist() == [2, 1]


@settings(max_examples=50)
@given(st.lists(st.sampled_from([A, B, EOS]), min_size=1, max_size=12))
def test_hard_mask_is_non_increasing_and_starts_at_one(tokens):
    m = compute_hard_mask(torch.tensor(tokens), EOS)
    assert m[0] == 1
    assert bool((m[1:] <= m[:-1]).all())


@pytest.mark.parametrize(
    "p, expected",
    [([0.2, 0.5, 0.9], [1.0, 0.8, 0.4]), ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), ([1.0, 0.3, 0.3, 0.3], [1.0, 0.0, 0.0, 0.0])],
)
def test_expected_mask_values(p, expected):
    np.testing.assert_allclose(expected_mask(torch.tensor(p, dtype=torch.float64)).numpy(), expected, atol=1e-15)


def test_expected_mask_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        expected_mask(torch.tensor([0.5, 1.5]))
    with pytest.raises(ValueError):
        expected_mask(torch.tensor([-0.1]))


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_expected_mask_properties(p):
    e = expected_mask(torch.tensor(p, dtype=torch.float64))
    assert e[0] == 1
    assert bool(((e >= 0) & (e <= 1)).all())
    assert bool((e[1:] <= e[:-1] + 1e-15).all())


def test_expected_mask_matches_monte_carlo():
    p = np.array([0.1, 0.3, 0.05, 0.5, 0.2])
    samples = sample_hard_masks(p, 100_000, np.random.default_rng(0))
    np.testing.assert_allclose(samples.mean(0), expected_mask(torch.tensor(p)).numpy(), atol=0.01)


def test_feedback_forward_is_exactly_hard_times_vq():
    v = torch.randn(2, 4, 3, dtype=torch.float64)
    hard = compute_hard_mask(torch.tensor([[A, EOS, B, B], [A, A, A, EOS]]), EOS).double()
    p = torch.rand(2, 4, dtype=torch.float64)
    out = apply_mask_feedback(v, hard, p)
    assert torch.equal(out, v * hard.unsqueeze(-1))
    assert (out[0, 2:] == 0).all()


def test_feedback_identity_when_nothing_halts():
    v = torch.randn(3, 2, dtype=torch.float64)
    p = torch.zeros(3, dtype=torch.float64, requires_grad=True)
    out = apply_mask_feedback(v, torch.ones(3, dtype=torch.float64), p)
    assert torch.equal(out, v)
    out.sum().backward()
    # only E[m][i>0] depends on p, through (1 - p); the gradient is -sum of later rows
    np.testing.assert_allclose(p.grad.numpy(), [-v[1:].sum().item(), -v[2:].sum().item(), 0.0], atol=1e-12)


def test_feedback_eos_gradient_matches_expected_mask_path():
    rng = np.random.default_rng(3)
    T, d = 6, 4
    v = torch.tensor(rng.normal(size=(T, d)))
    w = torch.tensor(rng.normal(size=d))
    hard = torch.tensor([1, 1, 1, 0, 0, 0], dtype=torch.float64)
    p0 = rng.uniform(0.05, 0.6, size=T)

    p = torch.tensor(p0, requires_grad=True)
    (apply_mask_feedback(v, hard, p) @ w).sum().backward()

    def oracle(q):
        e = expected_mask(torch.tensor(q))
        return float(((v * e.unsqueeze(-1)) @ w).sum())

    fd = finite_difference_gradient(oracle, p0, 1e-6)
    np.testing.assert_allclose(p.grad.numpy(), fd, rtol=1e-4, atol=1e-8)


def test_eos_gradient_sign_when_later_positions_help():
    # loss decreases as later contributions grow -> raising p_k raises the loss
    v = torch.ones(5, 2, dtype=torch.float64)
    p = torch.full((5,), 0.2, dtype=torch.float64, requires_grad=True)
    loss = -apply_mask_feedback(v, torch.ones(5, dtype=torch.float64), p).sum()
    loss.backward()
    assert (p.grad[:-1] > 0).all()
    # the mirror loss (penalise magnitude of later positions) has strictly negative gradient
    p.grad = None
    apply_mask_feedback(v, torch.ones(5, dtype=torch.float64), p).sum().backward()
    assert (p.grad[:-1] < 0).all()


def test_no_feedback_means_no_eos_gradient():
    v = torch.randn(4, 3, dtype=torch.float64)
    p = torch.full((4,), 0.3, dtype=torch.float64, requires_grad=True)
    out = apply_mask_feedback(v, torch.ones(4, dtype=torch.float64), None)
    assert not out.requires_grad or p.grad is None


def test_length_mismatch():
    with pytest.raises(ValueError):
        apply_mask_feedback(torch.zeros(3, 2), torch.ones(4))
    with pytest.raises(ValueError):
        apply_mask_feedback(torch.zeros(3, 2), torch.ones(3), torch.zeros(2))
