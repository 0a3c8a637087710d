"""Suicide, win, day-count and accord statistics for episodes and batches.

Running statistics are kept as (count, mean, M2) triples so that batches
merge exactly and in any order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .game import Outcome


def record_execution(votes: dict[int, int], executed: int, alive_voters=None) -> tuple[int, float]:
    """Return ``(self-votes, share of voters that picked the executed player)``."""
    voters = votes if alive_voters is None else alive_voters
    suicides = agreeing = 0
    for v in voters:
        t = votes.get(v)
        if t == v:
            suicides += 1
        if t == executed:
            agreeing += 1
    return suicides, agreeing / len(voters)


@dataclass
class EpisodeMetrics:
    suicide_events: int = 0
    voter_slots: int = 0
    days: int = 0
    winner: Outcome | None = None
    accord_samples: list[float] = field(default_factory=list)
    suicide_samples: list[float] = field(default_factory=list)

    def add_execution(self, suicides: int, voters: int, accord: float) -> None:
        self.suicide_events += suicides
        self.voter_slots += voters
        self.suicide_samples.append(suicides / voters)
        self.accord_samples.append(accord)

    def finish(self, days: int, winner: Outcome) -> None:
        self.days = days
        self.winner = winner

    @property
    def suicide_rate(self) -> float:
        return self.suicide_events / self.voter_slots if self.voter_slots else 0.0

    @property
    def villagers_won(self) -> bool:
        return self.winner is Outcome.VILLAGERS_WIN


@dataclass
class Stat:
    """Running mean with standard error."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "Stat") -> "Stat":
        if other.n == 0:
            return Stat(self.n, self.mean, self.m2)
        if self.n == 0:
            return Stat(other.n, other.mean, other.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Stat(n, mean, m2)

    @property
    def std(self) -> float:
        return math.sqrt(self.m2 / (self.n - 1)) if self.n > 1 else 0.0

    @property
    def se(self) -> float:
        return self.std / math.sqrt(self.n) if self.n > 1 else 0.0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "n": self.n}


@dataclass
class AggregateMetrics:
    villager_win_rate: Stat = field(default_factory=Stat)
    mean_days: Stat = field(default_factory=Stat)
    # per execution phase: self-votes / voters
    mean_suicide_rate: Stat = field(default_factory=Stat)
    # per execution phase: voters agreeing with the executed target / voters
    mean_accord: Stat = field(default_factory=Stat)

    def add(self, episode: EpisodeMetrics) -> None:
        # truncated games count as wolf wins
        self.villager_win_rate.add(1.0 if episode.villagers_won else 0.0)
        self.mean_days.add(float(episode.days))
        for s in episode.suicide_samples:
            self.mean_suicide_rate.add(s)
        for a in episode.accord_samples:
            self.mean_accord.add(a)

    def merge(self, other: "AggregateMetrics") -> "AggregateMetrics":
        return AggregateMetrics(
            self.villager_win_rate.merge(other.villager_win_rate),
            self.mean_days.merge(other.mean_days),
            self.mean_suicide_rate.merge(other.mean_suicide_rate),
            self.mean_accord.merge(other.mean_accord),
        )

    @property
    def episodes(self) -> int:
        return self.villager_win_rate.n

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "villager_win_rate": self.villager_win_rate.to_dict(),
            "mean_days": self.mean_days.to_dict(),
            "mean_suicide_rate": self.mean_suicide_rate.to_dict(),
            "mean_accord": self.mean_accord.to_dict(),
            "suicide_normalization": "per execution phase per alive voter",
        }


def aggregate(batch: Iterable[EpisodeMetrics]) -> AggregateMetrics:
    agg = AggregateMetrics()
    for episode in batch:
        agg.add(episode)
    if agg.episodes == 0:
        raise ValueError("cannot aggregate an empty batch")
    return agg
