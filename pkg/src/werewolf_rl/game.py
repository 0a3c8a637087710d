"""Werewolf game state machine: roles, phases, plurality executions and win checks.

The state is a plain mutable record. Every change goes through the functions in
this module, which mutate the state in place and return it for chaining.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """A configuration violates one of its constraints."""


class GameLogicError(RuntimeError):
    """An operation was called in a state where it makes no sense.

    Raised for sequencing bugs such as killing a dead player or advancing a
    finished game.
    """


class ContractError(ValueError):
    """Caller broke an input contract (wrong action count, dead observer...)."""


class Role(enum.IntEnum):
    VILLAGER = 0
    WEREWOLF = 1


class Phase(enum.IntEnum):
    NIGHT_COMMUNICATION = 1
    NIGHT_EXECUTION = 2
    DAY_COMMUNICATION = 3
    DAY_EXECUTION = 4

    @property
    def is_execution(self) -> bool:
        return self is Phase.NIGHT_EXECUTION or self is Phase.DAY_EXECUTION

    @property
    def is_night(self) -> bool:
        return self is Phase.NIGHT_COMMUNICATION or self is Phase.NIGHT_EXECUTION


_NEXT_PHASE = {
    Phase.NIGHT_COMMUNICATION: Phase.NIGHT_EXECUTION,
    Phase.NIGHT_EXECUTION: Phase.DAY_COMMUNICATION,
    Phase.DAY_COMMUNICATION: Phase.DAY_EXECUTION,
    Phase.DAY_EXECUTION: Phase.NIGHT_COMMUNICATION,
}


class Outcome(enum.Enum):
    VILLAGERS_WIN = "villagers_win"
    WEREWOLVES_WIN = "werewolves_win"
    TRUNCATED = "truncated"

    @property
    def villagers_won(self) -> bool:
        # truncation favours the wolves: a stalled execution phase is their win
        return self is Outcome.VILLAGERS_WIN


@dataclass(frozen=True)
class GameConfig:
    num_players: int = 9
    num_wolves: int = 3
    day_cap: int = 10
    seed: int = 0

    def __post_init__(self):
        validate_config(self)

    @property
    def num_villagers(self) -> int:
        return self.num_players - self.num_wolves


def validate_config(config: GameConfig) -> None:
    n, w = config.num_players, config.num_wolves
    if n < 1:
        raise ConfigError(f"num_players must be positive, got {n}")
    if w < 1:
        raise ConfigError(f"num_wolves must be positive, got {w}")
    if not n - w > w + 1:
        raise ConfigError(
            f"villagers must outnumber wolves by more than one (N - W > W + 1); "
            f"got N={n}, W={w}"
        )
    if config.day_cap < 1:
        raise ConfigError(f"day_cap must be >= 1, got {config.day_cap}")
    if not 0 <= config.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {config.seed}")


@dataclass
class GameState:
    config: GameConfig
    roles: list[Role]
    id_permutation: list[int]
    alive: list[bool]
    last_targets: list[int]
    last_signals: np.ndarray
    day: int = 1
    phase: Phase = Phase.NIGHT_COMMUNICATION
    outcome: Outcome | None = None
    # phase whose actions are held in last_targets / last_signals
    last_phase: Phase | None = None
    deaths: list[int] = field(default_factory=list)

    @property
    def num_players(self) -> int:
        return self.config.num_players

    def __post_init__(self):
        self._refresh()

    def _refresh(self) -> None:
        # seat lists are rebuilt on every death and shared read-only with callers
        alive = self.alive
        self._players = tuple(i for i, a in enumerate(alive) if a)
        self._villagers = tuple(i for i in self._players if self.roles[i] is Role.VILLAGER)
        self._wolves = tuple(i for i in self._players if self.roles[i] is Role.WEREWOLF)

    def _drop(self, victim: int) -> None:
        players = list(self._players)
        players.remove(victim)
        self._players = tuple(players)
        group = list(self._wolves if self.roles[victim] is Role.WEREWOLF else self._villagers)
        group.remove(victim)
        if self.roles[victim] is Role.WEREWOLF:
            self._wolves = tuple(group)
        else:
            self._villagers = tuple(group)

    def alive_players(self) -> tuple[int, ...]:
        return self._players

    def alive_villagers(self) -> tuple[int, ...]:
        return self._villagers

    def alive_wolves(self) -> tuple[int, ...]:
        return self._wolves

    def counts(self) -> tuple[int, int]:
        """Return ``(alive wolves, alive villagers)``."""
        return len(self._wolves), len(self._villagers)

    def is_wolf(self, player: int) -> bool:
        return self.roles[player] is Role.WEREWOLF


def new_game(
    config: GameConfig,
    seed: int | None = None,
    *,
    rng: np.random.Generator | None = None,
    signal_length: int = 0,
) -> GameState:
    """Start a match with wolf labels shuffled uniformly among the seats.

    The shuffle draws from ``rng`` when given (the environment passes its
    episode generator so one seed drives the whole match), otherwise from a
    fresh generator seeded with ``seed`` or ``config.seed``.
    """
    validate_config(config)
    if rng is None:
        rng = np.random.default_rng(config.seed if seed is None else seed)
    n = config.num_players
    perm = rng.permutation(n)
    # seats perm[:W] receive the wolf labels
    roles = [Role.VILLAGER] * n
    for seat in perm[: config.num_wolves]:
        roles[int(seat)] = Role.WEREWOLF
    return GameState(
        config=config,
        roles=roles,
        id_permutation=[int(p) for p in perm],
        alive=[True] * n,
        last_targets=[-1] * n,
        last_signals=np.full((n, signal_length), -1, dtype=np.int64),
    )


def resolve_execution(votes: dict[int, int], eligible_targets, rng: np.random.Generator) -> int:
    """Plurality winner of ``votes``; ties are broken uniformly with ``rng``."""
    if not votes:
        raise GameLogicError("execution with no votes; phase sequencing is broken")
    tally: dict[int, int] = {}
    for target in votes.values():
        tally[target] = tally.get(target, 0) + 1
    best = 0
    leaders: list[int] = []
    for target, count in tally.items():
        if target not in eligible_targets:
            raise ContractError(f"vote for ineligible target {target}")
        if count > best:
            best = count
            leaders = [target]
        elif count == best:
            leaders.append(target)
    if len(leaders) == 1:
        return leaders[0]
    leaders.sort()
    return leaders[int(rng.random() * len(leaders))]


def apply_death(state: GameState, victim: int) -> GameState:
    if not state.alive[victim]:
        raise GameLogicError(f"player {victim} is already dead")
    state.alive[victim] = False
    state.last_targets[victim] = -1
    if state.last_signals.shape[1]:
        state.last_signals[victim, :] = -1
    state.deaths.append(victim)
    state._drop(victim)
    return state


def check_outcome(state: GameState) -> Outcome | None:
    wolves, villagers = state.counts()
    if wolves == 0:
        return Outcome.VILLAGERS_WIN
    if wolves >= villagers:
        return Outcome.WEREWOLVES_WIN
    if state.day > state.config.day_cap:
        return Outcome.TRUNCATED
    return None


def advance_phase(state: GameState) -> GameState:
    if state.outcome is not None:
        raise GameLogicError("cannot advance a finished game")
    if state.phase is Phase.DAY_EXECUTION:
        state.day += 1
    state.phase = _NEXT_PHASE[state.phase]
    return state
