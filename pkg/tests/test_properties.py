"""Property suites over generated games, each run on at least 1000 cases.

``CASES`` counts the examples each property actually executed so that the
acceptance suite can confirm the volume.
"""
from __future__ import annotations

from collections import Counter

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from werewolf_rl.env import (
    DAY_SLOTS,
    PHASE_SLOTS,
    CommSpec,
    EnvConfig,
    RewardConfig,
    WerewolfEnv,
    decode_observation,
    encode_many,
)
from werewolf_rl.game import GameConfig, Phase, Role, advance_phase, new_game, resolve_execution
from werewolf_rl.learner.network import PolicyMemory, init_params, step
from werewolf_rl.metrics import record_execution

from _support import any_target_joint, play_traced

CASES: Counter = Counter()
MIN_CASES = 1000

PROPERTY = settings(
    max_examples=MIN_CASES,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
    database=None,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)


@st.composite
def game_configs(draw, max_players: int = 16):
    w = draw(st.integers(1, 4))
    n = draw(st.integers(2 * w + 2, max(2 * w + 2, max_players)))
    return GameConfig(n, w, day_cap=draw(st.integers(1, 12)))


@st.composite
def env_configs(draw, max_players: int = 16):
    game = draw(game_configs(max_players))
    sl = draw(st.integers(0, 3))
    sr = draw(st.integers(2, game.num_players))
    accord = draw(st.sampled_from([-1.0, -0.5, 0.0]))
    return EnvConfig(game, CommSpec(sl, sr), RewardConfig(accord_penalty=accord))


# phase cycle -----------------------------------------------------------------


@PROPERTY
@given(steps=st.integers(0, 400), seed=seeds)
def test_phase_cycle_advance(steps, seed):
    CASES["phase-cycle"] += 1
    state = new_game(GameConfig(9, 3), seed % 2**32)
    seen = []
    for _ in range(steps):
        seen.append(int(state.phase))
        advance_phase(state)
    assert seen == [1 + i % 4 for i in range(steps)]
    assert state.day == 1 + steps // 4
    assert int(state.phase) == 1 + steps % 4


@PROPERTY
@given(cfg=env_configs(), seed=seeds, policy_seed=seeds)
def test_phase_cycle_in_play(cfg, seed, policy_seed):
    CASES["phase-cycle-play"] += 1
    env = WerewolfEnv(cfg, encode_observations=False)
    trace = play_traced(env, seed, policy_seed)
    n, w = cfg.game.num_players, cfg.game.num_wolves
    for i, (ph, day) in enumerate(zip(trace.phases, trace.days)):
        assert ph == 1 + i % 4
        assert day == 1 + i // 4
    for i, res in enumerate(trace.results):
        before = sum(trace.alive_before[i])
        deaths = 1 if Phase(trace.phases[i]).is_execution else 0
        assert (res.info["executed"] is not None) == bool(deaths)
        if i + 1 < len(trace.results):
            assert sum(trace.alive_before[i + 1]) == before - deaths
            assert all(b or not a for a, b in zip(trace.alive_before[i + 1], trace.alive_before[i]))
    # a full day removes two players and a live day needs three, so N=9 ends by day 4
    assert trace.days[-1] <= min((n - 1) // 2, cfg.game.day_cap)
    assert sum(r is Role.WEREWOLF for r in env.state.roles) == w


# reward accounting ----------------------------------------------------------


def _expected_rewards(cfg: EnvConfig, roles, alive_before, res) -> np.ndarray:
    rc = cfg.rewards
    n = cfg.game.num_players
    exp = np.zeros(n)
    info = res.info
    alive = list(alive_before)
    if info["executed"] is not None:
        for voter, target in info["votes"].items():
            if target != info["executed"]:
                exp[voter] += rc.accord_penalty
        exp[info["executed"]] += rc.death_penalty
        alive[info["executed"]] = False
    if info["phase"] is Phase.DAY_EXECUTION:
        exp[[i for i in range(n) if alive[i]]] += rc.day_penalty
    if res.done:
        villagers_won = info["outcome"].villagers_won
        for i, role in enumerate(roles):
            won = (role is Role.VILLAGER) == villagers_won
            exp[i] += rc.terminal_bonus if won else -rc.terminal_bonus
    return exp


@PROPERTY
@given(cfg=env_configs(), seed=seeds, policy_seed=seeds)
def test_reward_accounting(cfg, seed, policy_seed):
    CASES["reward-accounting"] += 1
    env = WerewolfEnv(cfg, encode_observations=False)
    trace = play_traced(env, seed, policy_seed)
    roles = env.state.roles
    rc = cfg.rewards
    for alive_before, res in zip(trace.alive_before, trace.results):
        np.testing.assert_allclose(res.rewards, _expected_rewards(cfg, roles, alive_before, res), atol=1e-12)
        if not res.done:
            dead = [i for i, a in enumerate(alive_before) if not a]
            assert np.all(res.rewards[dead] == 0)
    final = trace.results[-1]
    w = cfg.game.num_wolves
    v = cfg.game.num_players - w
    winners, losers = (v, w) if final.info["outcome"].villagers_won else (w, v)
    # the terminal step's bonus part, after removing the per-step terms the oracle also predicts
    nonterminal = _expected_rewards(cfg, roles, trace.alive_before[-1], _NotDone(final))
    assert np.isclose((final.rewards - nonterminal).sum(), (winners - losers) * rc.terminal_bonus)


class _NotDone:
    def __init__(self, res):
        self.info = res.info
        self.done = False


# communication independence ---------------------------------------------------


@PROPERTY
@given(cfg=env_configs(max_players=12), seed=seeds, policy_seed=seeds, s1=seeds, s2=seeds)
def test_communication_independence(cfg, seed, policy_seed, s1, s2):
    CASES["communication-independence"] += 1
    if cfg.comm.signal_length == 0:
        cfg = EnvConfig(cfg.game, CommSpec(1, 2), cfg.rewards)
    a = play_traced(WerewolfEnv(cfg, encode_observations=False), seed, policy_seed, signal_seed=s1)
    b = play_traced(WerewolfEnv(cfg, encode_observations=False), seed, policy_seed, signal_seed=s2)
    assert [r.info["executed"] for r in a.results] == [r.info["executed"] for r in b.results]
    assert a.results[-1].info["outcome"] == b.results[-1].info["outcome"]
    for ra, rb in zip(a.results, b.results):
        np.testing.assert_array_equal(ra.rewards, rb.rewards)


# observation layout ----------------------------------------------------------


@PROPERTY
@given(cfg=env_configs(max_players=12), seed=seeds, policy_seed=seeds, cut=st.integers(0, 60),
       day=st.one_of(st.none(), st.integers(1, 15)), pick=st.integers(0, 100))
def test_observation_layout(cfg, seed, policy_seed, cut, day, pick):
    CASES["observation-layout"] += 1
    env = WerewolfEnv(cfg, encode_observations=False)
    trace = play_traced(env, seed, policy_seed)
    # replay up to a cut point so the state is mid-episode
    env2 = WerewolfEnv(cfg, encode_observations=True)
    obs = env2.reset(seed)
    rng = np.random.default_rng(policy_seed)
    for _ in range(min(cut, len(trace.results) - 1)):
        res = env2.step(any_target_joint(env2.state, rng, cfg.comm.signal_length, cfg.comm.signal_range))
        obs = res.observations
    state = env2.state
    if day is not None:
        state.day = day
        obs = dict(zip(state.alive_players(), encode_many(state, state.alive_players(), cfg.comm)))
    n, sl, sr = cfg.game.num_players, cfg.comm.signal_length, cfg.comm.signal_range
    agent = state.alive_players()[pick % len(state.alive_players())]
    vec = obs[agent]
    assert vec.shape == (PHASE_SLOTS + DAY_SLOTS + 3 * n + n * sl,)
    assert np.all((vec >= 0) & (vec <= 1))
    assert vec[:PHASE_SLOTS].sum() == 1 and vec[int(state.phase) - 1] == 1
    day_block = vec[PHASE_SLOTS : PHASE_SLOTS + DAY_SLOTS]
    assert day_block.sum() == 1 and day_block[min(state.day, DAY_SLOTS) - 1] == 1
    dec = decode_observation(vec, n, sl, sr)
    assert dec.status_map == list(state.alive)
    assert dec.own_id == agent
    hidden = (state.last_phase is not None and state.last_phase.is_night
              and state.roles[agent] is Role.VILLAGER)
    assert dec.targets == ([-1] * n if hidden else list(state.last_targets))
    assert dec.signals == state.last_signals.tolist()
    for i in range(n):
        if not state.alive[i]:
            assert dec.targets[i] == -1 and all(s == -1 for s in dec.signals[i])


# masking safety ---------------------------------------------------------------


@PROPERTY
@given(n=st.integers(4, 12), sl=st.integers(0, 2), hidden=st.integers(1, 8), seed=seeds,
       gain=st.sampled_from([0.01, 1.0, 10.0, 100.0]), rows=st.integers(1, 6), data=st.data())
def test_masking_safety(n, sl, hidden, seed, gain, rows, data):
    CASES["masking-safety"] += 1
    rng = np.random.default_rng(seed)
    width = PHASE_SLOTS + DAY_SLOTS + 3 * n + n * sl
    params = init_params(width, n, sl, 2, hidden=hidden, seed=int(seed % 2**32), head_gain=gain)
    for k in params.arrays:
        params.arrays[k] = params.arrays[k] + gain * 0.1 * rng.standard_normal(params.arrays[k].shape)
    masks = np.array([data.draw(st.lists(st.booleans(), min_size=n, max_size=n)) for _ in range(rows)])
    masks[~masks.any(axis=1), int(rng.integers(n))] = True
    obs = rng.random((rows, width))
    mem = PolicyMemory(rng.standard_normal((rows, hidden)), rng.standard_normal((rows, hidden)))
    out = step(params, obs, mem, masks)
    assert np.all(out.target_probs[~masks] <= 1e-9)
    np.testing.assert_allclose(out.target_probs.sum(axis=1), 1.0, atol=1e-6)
    if sl:
        np.testing.assert_allclose(out.signal_probs.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all(np.isfinite(out.value))


# accord range -------------------------------------------------------------------


@PROPERTY
@given(k=st.integers(1, 20), data=st.data(), seed=seeds)
def test_accord_range(k, data, seed):
    CASES["accord-range"] += 1
    n = data.draw(st.integers(k, 24))
    voters = data.draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
    votes = {v: data.draw(st.integers(0, n - 1)) for v in voters}
    executed = resolve_execution(votes, set(range(n)), np.random.default_rng(seed))
    suicides, accord = record_execution(votes, executed, voters)
    assert 1 / k - 1e-12 <= accord <= 1.0
    assert 0 <= suicides <= k
    assert suicides == sum(1 for v, t in votes.items() if v == t)
