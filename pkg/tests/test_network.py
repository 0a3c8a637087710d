"""Forward pass, masking and hand-written backpropagation of the villager network."""
from __future__ import annotations

import numpy as np
import pytest

from werewolf_rl.game import ContractError
from werewolf_rl.learner.network import (
    PolicyMemory,
    forward,
    init_params,
    sequence_forward,
    step,
)

from _support import gradient_check


def _zero_heads(params):
    for k in ("w_tgt", "b_tgt", "w_sig", "b_sig"):
        params.arrays[k] = np.zeros_like(params.arrays[k])
    return params


def test_parameter_shapes():
    p = init_params(50, 9, 1, 2)
    assert {k: v.shape for k, v in p.arrays.items()} == p.shapes
    assert p.shapes["w_sig"] == (64, 2)
    assert p.all_finite()


def test_single_legal_target():
    p = init_params(41, 9, 0, 2, seed=3, head_gain=5.0)
    mask = np.zeros(9, dtype=bool)
    mask[6] = True
    probs, _, value, _ = forward(p, np.random.default_rng(0).random(41), PolicyMemory.zeros(1, 64), mask)
    assert probs[0, 6] == 1.0 and probs.sum() == 1.0
    assert np.isfinite(value).all()


def test_zero_heads_uniform_over_legal():
    p = _zero_heads(init_params(41, 9, 0, 2, seed=1))
    mask = np.array([1, 0, 1, 1, 0, 1, 1, 1, 0], dtype=bool)
    probs, *_ = forward(p, np.ones(41), PolicyMemory.zeros(1, 64), mask)
    np.testing.assert_allclose(probs[0][mask], 1 / 6)
    assert np.all(probs[0][~mask] == 0)


def test_bit_channel_is_one_bernoulli():
    p = _zero_heads(init_params(50, 9, 1, 2, seed=1))
    _, sig, _, _ = forward(p, np.ones(50), PolicyMemory.zeros(1, 64), np.ones(9, dtype=bool))
    assert sig.shape == (1, 1, 2)
    np.testing.assert_allclose(sig, 0.5)


def test_signal_rows_each_normalised():
    p = init_params(68, 9, 3, 4, seed=2, head_gain=3.0)
    out = step(p, np.random.default_rng(1).random((5, 68)), PolicyMemory.zeros(5, 64), np.ones((5, 9), bool))
    assert out.signal_probs.shape == (5, 3, 4)
    np.testing.assert_allclose(out.signal_probs.sum(axis=-1), 1.0, atol=1e-12)


def test_all_false_mask_rejected():
    p = init_params(41, 9, 0, 2)
    with pytest.raises(ContractError):
        forward(p, np.ones(41), PolicyMemory.zeros(1, 64), np.zeros(9, dtype=bool))


def test_memory_rows_independent():
    p = init_params(41, 9, 0, 2, seed=4, head_gain=1.0)
    rng = np.random.default_rng(0)
    obs = rng.random((3, 41))
    mask = np.ones((3, 9), bool)
    base = PolicyMemory(rng.standard_normal((3, 64)), rng.standard_normal((3, 64)))
    poked = PolicyMemory(base.h.copy(), base.c.copy())
    poked.h[0] += 1.0
    poked.c[0] -= 1.0
    a, b = step(p, obs, base, mask), step(p, obs, poked, mask)
    np.testing.assert_array_equal(a.target_probs[1:], b.target_probs[1:])
    np.testing.assert_array_equal(a.memory.h[1:], b.memory.h[1:])
    assert not np.allclose(a.target_probs[0], b.target_probs[0])


def test_memory_carries_information():
    p = init_params(41, 9, 0, 2, seed=4, head_gain=1.0)
    obs = np.random.default_rng(0).random((2, 1, 41))
    obs2 = obs.copy()
    obs2[0] = 0.0
    masks = np.ones((2, 1, 9), bool)
    zeros = np.zeros((2, 1), dtype=np.int64)
    sig = np.zeros((2, 1, 0), dtype=np.int64)
    a = sequence_forward(p, obs, masks, zeros, sig)
    b = sequence_forward(p, obs2, masks, zeros, sig)
    # same second observation, different first one: the recurrent state tells them apart
    assert a.value[1, 0] != b.value[1, 0]


def test_uniform_entropy_is_log_k():
    p = _zero_heads(init_params(59, 9, 2, 3, seed=0))
    mask = np.array([[1, 1, 1, 1, 0, 0, 0, 0, 0]], bool)
    fwd = sequence_forward(p, np.ones((1, 1, 59)), mask[None], np.zeros((1, 1), np.int64),
                           np.zeros((1, 1, 2), np.int64))
    assert fwd.entropy[0, 0] == pytest.approx(np.log(4) + 2 * np.log(3))


def test_flat_round_trip():
    p = init_params(41, 9, 1, 2, seed=8)
    q = p.copy()
    q.set_flat(p.flat() * 1.0)
    for k in p.arrays:
        np.testing.assert_array_equal(p[k], q[k])
    assert p.flat().size == p.size


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    assert gradient_check(seed) < 1e-4
