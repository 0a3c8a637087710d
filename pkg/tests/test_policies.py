"""Static werewolf behaviours, grudge tracking and the random player."""
from __future__ import annotations

import numpy as np
import pytest

from werewolf_rl.env import AgentAction, CommSpec, EnvConfig, WerewolfEnv
from werewolf_rl.game import GameConfig, GameLogicError, Phase, Role, apply_death, new_game
from werewolf_rl.policies import (
    RandomPolicy,
    StaticWolfPolicy,
    WolfPolicyKind,
    make_wolf_policy,
    update_grudges,
    wolf_targets,
)
from werewolf_rl.simulation import play_episode, run_episodes


def _state(seed=0, n=9, w=3, phase=Phase.NIGHT_EXECUTION):
    s = new_game(GameConfig(n, w), seed)
    s.phase = phase
    return s


def test_kinds():
    assert [k.value for k in WolfPolicyKind] == ["random", "unite", "revenge"]
    assert make_wolf_policy("unite").kind is WolfPolicyKind.UNITE
    with pytest.raises(ValueError):
        make_wolf_policy("greedy")


@pytest.mark.parametrize("phase", [Phase.NIGHT_EXECUTION, Phase.DAY_EXECUTION])
def test_unite_shares_one_villager(phase):
    rng = np.random.default_rng(1)
    for seed in range(50):
        s = _state(seed, phase=phase)
        targets = wolf_targets(WolfPolicyKind.UNITE, s, set(), rng)
        assert set(targets) == set(s.alive_wolves())
        assert len(set(targets.values())) == 1
        assert s.roles[next(iter(targets.values()))] is Role.VILLAGER


def test_random_singleton_support():
    s = _state()
    keep_w = s.alive_wolves()[0]
    keep_v = s.alive_villagers()[0]
    for p in s.alive_players():
        if p not in (keep_w, keep_v):
            apply_death(s, p)
    targets = wolf_targets(WolfPolicyKind.RANDOM, s, set(), np.random.default_rng(0))
    assert targets == {keep_w: keep_v}


def test_random_wolves_by_night_pick_villagers_independently():
    s = _state()
    rng = np.random.default_rng(3)
    draws = [wolf_targets(WolfPolicyKind.RANDOM, s, set(), rng) for _ in range(2000)]
    assert all(s.roles[t] is Role.VILLAGER for d in draws for t in d.values())
    # independent draws: the three wolves disagree a fair share of the time
    split = sum(len(set(d.values())) > 1 for d in draws) / len(draws)
    assert abs(split - (1 - 1 / 36)) < 0.03


def test_random_wolves_by_day_vote_any_alive_seat():
    s = _state(phase=Phase.DAY_EXECUTION)
    rng = np.random.default_rng(4)
    seen = {t for _ in range(3000) for t in wolf_targets(WolfPolicyKind.RANDOM, s, set(), rng).values()}
    assert seen == set(range(9))


def test_revenge_singleton_grudge():
    s = _state(phase=Phase.DAY_EXECUTION)
    g = s.alive_villagers()[1]
    targets = wolf_targets(WolfPolicyKind.REVENGE, s, {g}, np.random.default_rng(0))
    assert set(targets.values()) == {g}


def test_revenge_ignores_dead_grudges():
    s = _state()
    g = s.alive_villagers()[1]
    apply_death(s, g)
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert g not in wolf_targets(WolfPolicyKind.REVENGE, s, {g}, rng).values()


def test_needs_a_villager():
    s = _state()
    for v in s.alive_villagers():
        apply_death(s, v)
    with pytest.raises(GameLogicError):
        wolf_targets(WolfPolicyKind.RANDOM, s, set(), np.random.default_rng(0))


class TestGrudges:
    def setup_method(self):
        self.roles = [Role.VILLAGER] * 9
        for w in (0, 1, 8):
            self.roles[w] = Role.WEREWOLF
        self.alive = [True] * 9

    def test_nobody_voted_a_wolf(self):
        assert update_grudges({5}, {2: 3, 7: 4}, self.roles, self.alive) == set()

    def test_executed_voter_drops_out(self):
        alive = list(self.alive)
        alive[7] = False
        assert update_grudges(set(), {2: 0, 7: 1, 4: 5}, self.roles, alive) == {2}

    def test_rebuilt_not_accumulated(self):
        assert update_grudges({3, 4}, {5: 8}, self.roles, self.alive) == {5}

    def test_wolves_never_hold_grudges(self):
        assert update_grudges(set(), {0: 1, 2: 8}, self.roles, self.alive) == {2}


def test_grudge_trace_through_a_match():
    env = WerewolfEnv(EnvConfig(GameConfig(9, 3)))
    env.reset(12)
    s = env.state
    wolves = StaticWolfPolicy("revenge")
    wolf = s.alive_wolves()[0]
    accuser = s.alive_villagers()[0]
    rng = np.random.default_rng(0)
    # night 1: kill someone other than the accuser
    for _ in range(2):
        joint = wolves.act(env, s.alive_wolves(), None, rng)
        victim = next(v for v in s.alive_villagers() if v != accuser)
        joint.update({v: AgentAction(victim, ()) for v in s.alive_villagers()})
        joint.update({w: AgentAction(victim, ()) for w in s.alive_wolves()})
        wolves.observe(env, env.step(joint))
    # day 1: the accuser alone votes a wolf, everyone else executes another villager
    scapegoat = next(v for v in s.alive_villagers() if v != accuser)
    for _ in range(2):
        joint = {a: AgentAction(scapegoat, ()) for a in s.alive_players()}
        joint[accuser] = AgentAction(wolf, ())
        wolves.observe(env, env.step(joint))
    assert wolves.grudges == {accuser}
    # night 2: the revenge wolves all go for the accuser
    joint = wolves.act(env, s.alive_wolves(), None, rng)
    assert set(joint[w].target for w in s.alive_wolves()) == {accuser}
    joint.update({v: AgentAction(0, ()) for v in s.alive_villagers()})
    wolves.observe(env, env.step(joint))
    joint = wolves.act(env, s.alive_wolves(), None, rng)
    joint.update({v: AgentAction(0, ()) for v in s.alive_villagers()})
    res = env.step(joint)
    wolves.observe(env, res)
    assert res.info["executed"] == accuser
    assert wolves.grudges == set()


def test_static_wolves_are_silent():
    env = WerewolfEnv(EnvConfig(GameConfig(9, 3), CommSpec(2, 3)))
    env.reset(0)
    joint = StaticWolfPolicy("unite", 2).act(env, env.state.alive_wolves(), None, np.random.default_rng(0))
    assert all(a.signal == (-1, -1) for a in joint.values())


def test_random_player_is_legal():
    env = WerewolfEnv(EnvConfig(GameConfig(9, 3)), encode_observations=False)
    p = RandomPolicy()
    rng = np.random.default_rng(2)
    for seed in range(30):
        env.reset(seed)
        while True:
            s = env.state
            joint = p.act(env, s.alive_players(), None, rng)
            for a, act in joint.items():
                assert s.alive[act.target]
                if s.phase.is_night and s.roles[a] is Role.WEREWOLF:
                    assert s.roles[act.target] is Role.VILLAGER
            if env.step(joint).done:
                break


def test_play_episode_deterministic():
    env = WerewolfEnv(EnvConfig(GameConfig(9, 3)), encode_observations=False)
    a = play_episode(env, make_wolf_policy("revenge"), RandomPolicy(), 99)
    b = play_episode(env, make_wolf_policy("revenge"), RandomPolicy(), 99)
    assert (a.winner, a.days, a.accord_samples) == (b.winner, b.days, b.accord_samples)


def test_unite_raises_accord_and_shortens_games():
    cfg = EnvConfig(GameConfig(9, 3))
    rand = run_episodes(cfg, make_wolf_policy("random"), RandomPolicy(), 4000, 5)
    unite = run_episodes(cfg, make_wolf_policy("unite"), RandomPolicy(), 4000, 5)
    assert unite.mean_accord.mean > rand.mean_accord.mean
    assert unite.mean_days.mean < rand.mean_days.mean


def test_worker_split_matches_single_process():
    cfg = EnvConfig(GameConfig(9, 3))
    one = run_episodes(cfg, make_wolf_policy("random"), RandomPolicy(), 600, 3, workers=1)
    two = run_episodes(cfg, make_wolf_policy("random"), RandomPolicy(), 600, 3, workers=2)
    assert one.villager_win_rate.mean == pytest.approx(two.villager_win_rate.mean, abs=1e-12)
    assert one.mean_accord.mean == pytest.approx(two.mean_accord.mean, abs=1e-12)
