"""Hand-coded players: the three static werewolf behaviours and a uniform random player.

Static policies read the game state directly (wolves know every role) and emit
absent signals (-1 in every slot).
"""
from __future__ import annotations

import enum

import numpy as np

from .env import AgentAction, StepResult, WerewolfEnv
from .game import GameLogicError, GameState, Phase, Role


class WolfPolicyKind(enum.Enum):
    RANDOM = "random"
    UNITE = "unite"
    REVENGE = "revenge"


def _pick(seq, rng: np.random.Generator):
    return seq[int(rng.random() * len(seq))]


def wolf_targets(
    kind: WolfPolicyKind, state: GameState, grudges: set[int], rng: np.random.Generator
) -> dict[int, int]:
    """Targets for every alive wolf in the current phase.

    Night phases draw from alive villagers. By day, random wolves vote like a
    uniform random player (any alive seat), unite wolves share one villager,
    and revenge wolves share one villager drawn from ``grudges`` when any
    grudge holder is alive, otherwise they vote like random wolves.
    """
    wolves = state.alive_wolves()
    villagers = state.alive_villagers()
    if not wolves or not villagers:
        raise GameLogicError("wolf_targets needs at least one wolf and one villager alive")
    night = state.phase.is_night
    if kind is WolfPolicyKind.REVENGE:
        held = sorted(g for g in grudges if state.alive[g] and state.roles[g] is Role.VILLAGER)
        if held:
            target = _pick(held, rng)
            return dict.fromkeys(wolves, target)
    elif kind is WolfPolicyKind.UNITE:
        target = _pick(villagers, rng)
        return dict.fromkeys(wolves, target)
    pool = villagers if night else state.alive_players()
    return {w: _pick(pool, rng) for w in wolves}


def update_grudges(grudges: set[int], day_votes: dict[int, int], roles, alive) -> set[int]:
    """Villagers still alive who voted for a wolf in the day execution just resolved.

    The previous set is discarded, not extended.
    """
    return {
        v
        for v, t in day_votes.items()
        if alive[v] and roles[v] is Role.VILLAGER and t >= 0 and roles[t] is Role.WEREWOLF
    }


class StaticWolfPolicy:
    needs_observations = False

    def __init__(self, kind: WolfPolicyKind | str = WolfPolicyKind.RANDOM, signal_length: int = 0):
        self.kind = WolfPolicyKind(kind)
        self.signal_length = signal_length
        self.grudges: set[int] = set()

    def reset(self) -> None:
        self.grudges = set()

    def act(self, env: WerewolfEnv, agents, observations, rng) -> dict[int, AgentAction]:
        targets = wolf_targets(self.kind, env.state, self.grudges, rng)
        silent = (-1,) * self.signal_length
        return {a: AgentAction(targets[a], silent) for a in agents}

    def observe(self, env: WerewolfEnv, result: StepResult) -> None:
        info = result.info
        if info["phase"] is Phase.DAY_EXECUTION:
            state = env.state
            self.grudges = update_grudges(self.grudges, info["votes"], state.roles, state.alive)
        elif info["executed"] is not None:
            self.grudges.discard(info["executed"])


class RandomPolicy:
    """Uniform random player for either side.

    Targets are uniform over alive seats, except wolves at night, who pick
    uniformly among alive villagers (the only legal night victims).
    """

    needs_observations = False

    def __init__(self, signal_length: int = 0):
        self.signal_length = signal_length
        self._cache: list[AgentAction] = []

    def reset(self) -> None:
        pass

    def act(self, env: WerewolfEnv, agents, observations, rng) -> dict[int, AgentAction]:
        state = env.state
        everyone = state.alive_players()
        night = state.phase is Phase.NIGHT_COMMUNICATION or state.phase is Phase.NIGHT_EXECUTION
        villagers = state.alive_villagers() if night else everyone
        actions = self._actions(state.config.num_players)
        roles = state.roles
        out = {}
        for a, u in zip(agents, rng.random(len(agents)).tolist()):
            pool = villagers if roles[a] is Role.WEREWOLF else everyone
            out[a] = actions[pool[int(u * len(pool))]]
        return out

    def _actions(self, n: int) -> list[AgentAction]:
        if len(self._cache) != n:
            silent = (-1,) * self.signal_length
            self._cache = [AgentAction(t, silent) for t in range(n)]
        return self._cache

    def observe(self, env: WerewolfEnv, result: StepResult) -> None:
        pass


def make_wolf_policy(name: str, signal_length: int = 0):
    return StaticWolfPolicy(WolfPolicyKind(name), signal_length)
