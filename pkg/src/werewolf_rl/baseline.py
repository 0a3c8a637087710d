"""Exact villager win probability under random play, and a Monte Carlo check on it.

Under uniform random play every night removes one villager, and the day vote
executes each alive player with equal probability (random voters are
exchangeable, so the plurality winner is uniform). The game then reduces to a
Markov chain on ``(wolves, villagers)`` that is solved exactly with
:class:`fractions.Fraction`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from statsmodels.stats.proportion import proportion_confint

from .env import CommSpec, EnvConfig
from .game import GameConfig
from .simulation import run_episodes


class Stage(enum.Enum):
    BEFORE_NIGHT = "before_night"
    BEFORE_DAY_VOTE = "before_day_vote"


class Leaf(enum.Enum):
    VILLAGERS_WIN = "villagers_win"
    WEREWOLVES_WIN = "werewolves_win"


@dataclass(frozen=True)
class PopulationState:
    wolves: int
    villagers: int
    at: Stage = Stage.BEFORE_NIGHT

    @property
    def terminal(self) -> Leaf | None:
        if self.wolves == 0:
            return Leaf.VILLAGERS_WIN
        if self.wolves >= self.villagers:
            return Leaf.WEREWOLVES_WIN
        return None


def _check_domain(w: int, v: int) -> None:
    if w < 1 or v <= w:
        raise ValueError(f"need wolves >= 1 and villagers > wolves, got w={w}, v={v}")


def exact_win_prob(w: int, v: int) -> Fraction:
    """Probability that villagers win a random-play game starting before night one."""
    _check_domain(w, v)
    return _before_night(w, v)


@lru_cache(maxsize=None)
def _before_night(w: int, v: int) -> Fraction:
    v -= 1
    if w >= v:
        return Fraction(0)
    return _before_vote(w, v)


@lru_cache(maxsize=None)
def _before_vote(w: int, v: int) -> Fraction:
    n = w + v
    wolf_hit = Fraction(1) if w == 1 else _before_night(w - 1, v)
    villager_hit = Fraction(0) if w >= v - 1 else _before_night(w, v - 1)
    return Fraction(w, n) * wolf_hit + Fraction(v, n) * villager_hit


@dataclass(frozen=True)
class TreeNode:
    depth: int
    state: PopulationState
    prob: Fraction
    outcome: Leaf | None


@dataclass
class ExpandedTree:
    nodes: list[TreeNode]
    partial: bool

    @property
    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.outcome is not None]

    def win_probability(self) -> Fraction:
        return sum((n.prob for n in self.leaves if n.outcome is Leaf.VILLAGERS_WIN), Fraction(0))

    def to_text(self) -> str:
        lines = []
        for node in self.nodes:
            s = node.state
            label = node.outcome.value if node.outcome else s.at.value
            lines.append(f"{'  ' * node.depth}w={s.wolves} v={s.villagers} p={node.prob} [{label}]")
        return "\n".join(lines)

    def to_outline(self) -> str:
        """One node per line: ``depth wolves villagers numerator/denominator outcome``."""
        lines = []
        for node in self.nodes:
            s = node.state
            label = node.outcome.value if node.outcome else "open"
            lines.append(
                f"{node.depth} {s.wolves} {s.villagers} "
                f"{node.prob.numerator}/{node.prob.denominator} {label}"
            )
        return "\n".join(lines)


def enumerate_tree(w: int, v: int, max_depth: int = 64) -> ExpandedTree:
    """Depth-first listing of every branch of the random-play tree.

    A night is one level and a day vote is another. Nodes still open when
    ``max_depth`` is reached are kept as non-leaves and ``partial`` is set.
    """
    _check_domain(w, v)
    nodes: list[TreeNode] = []
    partial = False

    def visit(state: PopulationState, prob: Fraction, depth: int) -> None:
        nonlocal partial
        outcome = state.terminal if depth > 0 else None
        nodes.append(TreeNode(depth, state, prob, outcome))
        if outcome is not None:
            return
        if depth >= max_depth:
            partial = True
            return
        if state.at is Stage.BEFORE_NIGHT:
            visit(PopulationState(state.wolves, state.villagers - 1, Stage.BEFORE_DAY_VOTE), prob, depth + 1)
            return
        n = state.wolves + state.villagers
        visit(
            PopulationState(state.wolves - 1, state.villagers, Stage.BEFORE_NIGHT),
            prob * Fraction(state.wolves, n),
            depth + 1,
        )
        visit(
            PopulationState(state.wolves, state.villagers - 1, Stage.BEFORE_NIGHT),
            prob * Fraction(state.villagers, n),
            depth + 1,
        )

    visit(PopulationState(w, v), Fraction(1), 0)
    return ExpandedTree(nodes, partial)


@dataclass(frozen=True)
class MonteCarloEstimate:
    wins: int
    episodes: int
    ci_low: float
    ci_high: float

    @property
    def estimate(self) -> float:
        return self.wins / self.episodes

    @property
    def se(self) -> float:
        p = self.estimate
        return (p * (1 - p) / self.episodes) ** 0.5

    def agrees_with(self, p: float, k: float = 3.0) -> bool:
        """``|estimate - p| < k`` standard errors, the error taken at ``p`` itself."""
        se = (p * (1 - p) / self.episodes) ** 0.5
        if se == 0:
            return self.estimate == p
        return abs(self.estimate - p) < k * se


def wilson_interval(wins: int, episodes: int, alpha: float = 0.05) -> tuple[float, float]:
    low, high = proportion_confint(wins, episodes, alpha=alpha, method="wilson")
    return float(low), float(high)


def monte_carlo_win_prob(
    game_config: GameConfig,
    wolf_policy,
    villager_policy,
    episodes: int,
    seed: int,
    *,
    comm: CommSpec | None = None,
    workers: int = 1,
) -> MonteCarloEstimate:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env_config = EnvConfig(game_config, comm or CommSpec())
    agg = run_episodes(env_config, wolf_policy, villager_policy, episodes, seed, workers)
    wins = round(agg.villager_win_rate.mean * agg.episodes)
    low, high = wilson_interval(wins, episodes)
    return MonteCarloEstimate(wins, episodes, low, high)
