"""Multi-agent Werewolf environment with a discrete signalling channel.

Each alive agent submits an :class:`AgentAction` every phase: a target seat and
a signal vector of ``signal_length`` symbols drawn from ``range(signal_range)``.
Only targets drive the transition; signals are broadcast to the next
observations and nothing else.

Observation layout (flat ``float64`` vector, width ``4 + 10 + 3N + N*SL``)::

    [phase one-hot (4) | day one-hot (10) | status map (N) | own id one-hot (N)
     | targets (N) | signals (N x SL, row-major)]

Target slots hold ``(t + 1) / N`` and signal slots ``(s + 1) / SR`` so that the
sentinel -1 ("absent") encodes as 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .game import (
    ConfigError,
    ContractError,
    GameConfig,
    GameState,
    Outcome,
    Phase,
    Role,
    advance_phase,
    apply_death,
    check_outcome,
    new_game,
    resolve_execution,
)
from .metrics import EpisodeMetrics, record_execution

DAY_SLOTS = 10
PHASE_SLOTS = 4


@dataclass(frozen=True)
class CommSpec:
    signal_length: int = 0
    signal_range: int = 2

    def validate(self, num_players: int) -> None:
        if self.signal_length < 0:
            raise ConfigError(f"signal_length must be >= 0, got {self.signal_length}")
        if self.signal_length > 0 and not 2 <= self.signal_range <= num_players:
            raise ConfigError(
                f"signal_range must lie in [2, N={num_players}], got {self.signal_range}"
            )

    @property
    def label(self) -> str:
        if self.signal_length == 0:
            return "0SL"
        return f"{self.signal_length}SL-{self.signal_range}SR"


@dataclass(frozen=True)
class RewardConfig:
    day_penalty: float = -1.0
    death_penalty: float = -5.0
    accord_penalty: float = -1.0
    terminal_bonus: float = 25.0
    gamma: float = 0.99

    def validate(self) -> None:
        for name in ("day_penalty", "death_penalty", "accord_penalty"):
            if getattr(self, name) > 0:
                raise ConfigError(f"{name} must be <= 0")
        if self.terminal_bonus <= 0:
            raise ConfigError("terminal_bonus must be > 0")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class EnvConfig:
    game: GameConfig = field(default_factory=GameConfig)
    comm: CommSpec = field(default_factory=CommSpec)
    rewards: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        self.comm.validate(self.game.num_players)
        self.rewards.validate()

    @property
    def observation_width(self) -> int:
        return observation_width(self.game.num_players, self.comm.signal_length)


def observation_width(num_players: int, signal_length: int) -> int:
    return PHASE_SLOTS + DAY_SLOTS + 3 * num_players + num_players * signal_length


class AgentAction(NamedTuple):
    target: int
    signal: tuple[int, ...] = ()


@dataclass
class Observation:
    """Decoded form of one flat observation vector."""

    phase: int
    day: int
    status_map: list[bool]
    own_id: int
    targets: list[int]
    signals: list[list[int]]


@dataclass
class StepResult:
    observations: dict[int, np.ndarray]
    rewards: np.ndarray
    done: bool
    info: dict


def filter_action(
    raw: AgentAction, state: GameState, agent: int, rng: np.random.Generator
) -> AgentAction:
    """Make ``raw`` legal for the current phase.

    Communication phases keep targets verbatim. At night a villager's target is
    replaced by -1 (villagers do not vote); a wolf target that is not an alive
    villager is redrawn uniformly among alive villagers. By day a vote for a dead
    player is redrawn uniformly among alive players.
    """
    target = filter_target(raw.target, state, agent, rng)
    return raw if target == raw.target else AgentAction(target, raw.signal)


def filter_target(target: int, state: GameState, agent: int, rng: np.random.Generator) -> int:
    """The target half of :func:`filter_action`."""
    n = state.config.num_players
    if not 0 <= target < n:
        raise ContractError(f"target {target} outside [0, {n - 1}]")
    phase = state.phase
    if phase is Phase.NIGHT_EXECUTION:
        if state.roles[agent] is Role.VILLAGER:
            return -1
        if state.alive[target] and state.roles[target] is Role.VILLAGER:
            return target
        eligible = state.alive_villagers()
    elif phase is Phase.DAY_EXECUTION:
        if state.alive[target]:
            return target
        eligible = state.alive_players()
    else:
        return target
    return eligible[int(rng.random() * len(eligible))]


def encode_observation(state: GameState, agent: int, comm: CommSpec) -> np.ndarray:
    if not state.alive[agent]:
        raise ContractError(f"dead agent {agent} has no observation")
    return encode_many(state, [agent], comm)[0]


def encode_many(state: GameState, agents, comm: CommSpec) -> np.ndarray:
    """Observation rows for every agent in ``agents`` (one row each)."""
    n = state.config.num_players
    sl, sr = comm.signal_length, comm.signal_range
    width = observation_width(n, sl)
    base = np.zeros(width)
    base[state.phase - 1] = 1.0
    base[PHASE_SLOTS + min(state.day, DAY_SLOTS) - 1] = 1.0
    off = PHASE_SLOTS + DAY_SLOTS
    base[off : off + n] = state.alive
    t_off = off + 2 * n
    targets = np.asarray(state.last_targets, dtype=np.float64)
    base[t_off : t_off + n] = (targets + 1.0) / n
    if sl:
        base[t_off + n :] = ((state.last_signals + 1.0) / sr).ravel()
    agents = list(agents)
    out = np.tile(base, (len(agents), 1))
    rows = np.arange(len(agents))
    out[rows, off + n + np.asarray(agents, dtype=np.int64)] = 1.0
    if state.last_phase is not None and state.last_phase.is_night:
        # villagers sleep through the night: wolves' night targets stay hidden
        for r, a in enumerate(agents):
            if state.roles[a] is Role.VILLAGER:
                out[r, t_off : t_off + n] = 0.0
    return out


def decode_observation(vec, num_players: int, signal_length: int, signal_range: int) -> Observation:
    n, sl = num_players, signal_length
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (observation_width(n, sl),):
        raise ContractError(f"observation has shape {vec.shape}, expected ({observation_width(n, sl)},)")
    off = PHASE_SLOTS + DAY_SLOTS
    t_off = off + 2 * n
    targets = np.rint(vec[t_off : t_off + n] * n).astype(int) - 1
    signals = np.rint(vec[t_off + n :].reshape(n, sl) * signal_range).astype(int) - 1
    return Observation(
        phase=int(np.argmax(vec[:PHASE_SLOTS])) + 1,
        day=int(np.argmax(vec[PHASE_SLOTS:off])) + 1,
        status_map=[bool(x) for x in vec[off : off + n] > 0.5],
        own_id=int(np.argmax(vec[off + n : off + 2 * n])),
        targets=targets.tolist(),
        signals=signals.tolist(),
    )


class WerewolfEnv:
    """One match at a time; ``reset`` starts a new one.

    ``encode_observations=False`` skips building observation vectors, which
    policies that read the game state directly (random and static players)
    never need.
    """

    def __init__(self, config: EnvConfig, *, encode_observations: bool = True):
        self.config = config
        self.encode_observations = encode_observations
        self.state: GameState | None = None
        self.rng: np.random.Generator | None = None
        self.metrics: EpisodeMetrics | None = None

    @property
    def num_players(self) -> int:
        return self.config.game.num_players

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.outcome is not None

    def reset(self, seed: int | None = None) -> dict[int, np.ndarray]:
        game = self.config.game
        self.rng = np.random.default_rng(game.seed if seed is None else seed)
        self.state = new_game(game, rng=self.rng, signal_length=self.config.comm.signal_length)
        self.metrics = EpisodeMetrics()
        return self._observe()

    def observe(self, agent: int) -> np.ndarray:
        return encode_observation(self.state, agent, self.config.comm)

    def _observe(self) -> dict[int, np.ndarray]:
        if not self.encode_observations:
            return {}
        agents = self.state.alive_players()
        rows = encode_many(self.state, agents, self.config.comm)
        return dict(zip(agents, rows))

    def _check_signal(self, agent: int, signal) -> None:
        comm = self.config.comm
        if len(signal) != comm.signal_length:
            raise ContractError(
                f"agent {agent} sent {len(signal)} symbols, signal_length is {comm.signal_length}"
            )
        for s in signal:
            if not -1 <= s < comm.signal_range:
                raise ContractError(f"agent {agent} sent symbol {s} outside [-1, {comm.signal_range - 1}]")

    def step(self, joint: Mapping[int, AgentAction]) -> StepResult:
        state = self.state
        if state is None or state.outcome is not None:
            raise ContractError("step() called on a finished or unstarted episode; call reset()")
        rc = self.config.rewards
        n = self.num_players
        alive = state.alive_players()
        if joint.keys() != set(alive):
            raise ContractError(
                f"expected one action from each of the {len(alive)} alive agents, got {sorted(joint)}"
            )
        phase = state.phase
        rewards = [0.0] * n
        sl = self.config.comm.signal_length
        execution = phase is Phase.NIGHT_EXECUTION or phase is Phase.DAY_EXECUTION
        last_targets = state.last_targets
        rng = self.rng
        for agent in alive:
            act = joint[agent]
            target = act.target
            if execution:
                target = filter_target(target, state, agent, rng)
            elif not 0 <= target < n:
                raise ContractError(f"target {target} outside [0, {n - 1}]")
            if sl or act.signal:
                self._check_signal(agent, act.signal)
                state.last_signals[agent] = act.signal
            last_targets[agent] = target
        state.last_phase = phase

        info: dict = {"phase": phase, "day": state.day, "executed": None, "outcome": None}
        outcome = None
        if execution:
            if phase is Phase.NIGHT_EXECUTION:
                voters = state.alive_wolves()
                eligible = set(state.alive_villagers())
            else:
                voters = alive
                eligible = set(alive)
            votes = {a: last_targets[a] for a in voters}
            executed = resolve_execution(votes, eligible, self.rng)
            suicides, accord = record_execution(votes, executed, voters)
            self.metrics.add_execution(suicides, len(voters), accord)
            penalty = rc.accord_penalty
            for voter, target in votes.items():
                if target != executed:
                    rewards[voter] += penalty
            apply_death(state, executed)
            rewards[executed] += rc.death_penalty
            info.update(executed=executed, votes=votes, suicides=suicides, accord=accord)
            outcome = check_outcome(state)

        if phase is Phase.DAY_EXECUTION:
            penalty = rc.day_penalty
            for agent in state.alive_players():
                rewards[agent] += penalty

        if outcome is None:
            advance_phase(state)
            if phase is Phase.DAY_EXECUTION:
                outcome = check_outcome(state)

        if outcome is not None:
            state.outcome = outcome
            winners = Role.VILLAGER if outcome is Outcome.VILLAGERS_WIN else Role.WEREWOLF
            bonus = rc.terminal_bonus
            for agent, role in enumerate(state.roles):
                rewards[agent] += bonus if role is winners else -bonus
            self.metrics.finish(min(state.day, self.config.game.day_cap), outcome)
            info["outcome"] = outcome

        observations = {} if outcome is not None else self._observe()
        return StepResult(observations, np.array(rewards), outcome is not None, info)
