"""Training loop and frozen-policy evaluation for the shared villager network."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..env import EnvConfig
from ..metrics import AggregateMetrics, aggregate
from ..seeding import derive_seed
from .network import PolicyParams, init_params
from .ppo import Adam, PPOConfig, compute_returns_and_advantages, ppo_objective
from .rollout import play_batch

log = logging.getLogger(__name__)

# stream tags mixed into the run seed
_INIT_STREAM = 0x1
_EPISODE_STREAM = 0x2
_MINIBATCH_STREAM = 0x3


class DivergenceError(RuntimeError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class IterationStats:
    iteration: int
    metrics: AggregateMetrics
    objective: float
    entropy: float
    value_loss: float
    clip_fraction: float
    grad_norm: float
    excluded: int

    def row(self) -> dict:
        m = self.metrics
        return {
            "iteration": self.iteration,
            "win_rate": m.villager_win_rate.mean,
            "accord": m.mean_accord.mean,
            "suicides": m.mean_suicide_rate.mean,
            "days": m.mean_days.mean,
            "objective": self.objective,
            "entropy": self.entropy,
        }


@dataclass
class TrainResult:
    params: PolicyParams
    optimizer: Adam
    history: list[IterationStats] = field(default_factory=list)

    @property
    def next_iteration(self) -> int:
        return self.history[-1].iteration + 1 if self.history else 0


def new_params(env_config: EnvConfig, ppo_config: PPOConfig, seed: int) -> PolicyParams:
    comm = env_config.comm
    return init_params(
        env_config.observation_width,
        env_config.game.num_players,
        comm.signal_length,
        comm.signal_range,
        hidden=ppo_config.hidden,
        seed=derive_seed(seed, _INIT_STREAM) & 0xFFFFFFFF,
    )


def train(
    env_config: EnvConfig,
    ppo_config: PPOConfig,
    iterations: int,
    seed: int,
    wolf_policy: str = "random",
    *,
    params: PolicyParams | None = None,
    optimizer: Adam | None = None,
    start_iteration: int = 0,
    on_iteration: Callable[[IterationStats, PolicyParams], None] | None = None,
) -> TrainResult:
    """Run ``iterations`` collect-then-optimise rounds.

    Every random draw of iteration ``k`` comes from streams derived from
    ``(seed, k)``, so resuming at ``start_iteration`` with the saved parameters
    and optimiser state continues the same run.
    """
    if params is None:
        params = new_params(env_config, ppo_config, seed)
    if optimizer is None:
        optimizer = Adam(params, ppo_config.learning_rate)
    result = TrainResult(params, optimizer)
    sl = env_config.comm.signal_length
    episodes = ppo_config.rollout_episodes_per_iteration

    for it in range(start_iteration, start_iteration + iterations):
        seeds = [derive_seed(seed, _EPISODE_STREAM, it, e) for e in range(episodes)]
        buffer, episode_metrics = play_batch(env_config, params, wolf_policy, seeds)
        batch = compute_returns_and_advantages(
            buffer.to_batch(sl), ppo_config, sequences=buffer.sequences
        )
        rng = np.random.default_rng(derive_seed(seed, _MINIBATCH_STREAM, it))
        S = batch.num_sequences
        objs, ents, vls, clips, norms, excluded = [], [], [], [], [], 0
        for _ in range(ppo_config.epochs_per_iteration):
            order = rng.permutation(S)
            for lo in range(0, S, ppo_config.minibatch_size):
                mb = batch.select(np.sort(order[lo : lo + ppo_config.minibatch_size]))
                res = ppo_objective(params, mb, ppo_config)
                grad_ok = all(np.all(np.isfinite(g)) for g in res.grads.values())
                if not np.isfinite(res.objective) or not grad_ok:
                    raise DivergenceError(
                        f"non-finite objective at iteration {it}",
                        {
                            "iteration": it,
                            "objective": res.objective,
                            "value_loss": res.value_loss,
                            "entropy": res.entropy,
                            "param_norms": {k: float(np.linalg.norm(v)) for k, v in params.arrays.items()},
                        },
                    )
                norms.append(optimizer.step(params, res.grads, ppo_config.max_grad_norm))
                objs.append(res.objective)
                ents.append(res.entropy)
                vls.append(res.value_loss)
                clips.append(res.clip_fraction)
                excluded += res.excluded
        stats = IterationStats(
            it, aggregate(episode_metrics), float(np.mean(objs)), float(np.mean(ents)),
            float(np.mean(vls)), float(np.mean(clips)), float(np.mean(norms)), excluded,
        )
        result.history.append(stats)
        log.info(
            "iter %d win=%.3f accord=%.3f days=%.2f obj=%.3f ent=%.3f",
            it, stats.metrics.villager_win_rate.mean, stats.metrics.mean_accord.mean,
            stats.metrics.mean_days.mean, stats.objective, stats.entropy,
        )
        if on_iteration is not None:
            on_iteration(stats, params)
    return result


def _evaluate_range(env_config, params, wolf_policy, seed, start, stop, batch_size) -> AggregateMetrics:
    agg = AggregateMetrics()
    for lo in range(start, stop, batch_size):
        seeds = [derive_seed(seed, i) for i in range(lo, min(lo + batch_size, stop))]
        _, episodes = play_batch(env_config, params, wolf_policy, seeds, record=False)
        for ep in episodes:
            agg.add(ep)
    return agg


def evaluate(
    env_config: EnvConfig,
    params: PolicyParams,
    wolf_policy: str,
    episodes: int,
    seed: int,
    *,
    batch_size: int = 256,
    workers: int = 1,
) -> AggregateMetrics:
    """Frozen-policy metrics with sampled actions; episode ``i`` uses ``derive_seed(seed, i)``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if workers <= 1:
        return _evaluate_range(env_config, params, wolf_policy, seed, 0, episodes, batch_size)
    from concurrent.futures import ProcessPoolExecutor

    bounds = np.linspace(0, episodes, workers + 1).astype(int)
    agg = AggregateMetrics()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_evaluate_range, env_config, params, wolf_policy, seed, int(a), int(b), batch_size)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        for f in futures:
            agg = agg.merge(f.result())
    return agg
