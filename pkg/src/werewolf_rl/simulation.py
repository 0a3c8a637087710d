"""Episode runner for policies that act on the live environment."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .env import EnvConfig, WerewolfEnv
from .metrics import AggregateMetrics, EpisodeMetrics
from .seeding import derive_seed


def play_episode(env: WerewolfEnv, wolf_policy, villager_policy, seed: int) -> EpisodeMetrics:
    """Play one full match; the env draws from ``seed``, the policies from a derived stream."""
    obs = env.reset(seed)
    rng = np.random.default_rng(derive_seed(seed, 1))
    wolf_policy.reset()
    villager_policy.reset()
    state = env.state
    while True:
        joint = wolf_policy.act(env, state.alive_wolves(), obs, rng)
        joint.update(villager_policy.act(env, state.alive_villagers(), obs, rng))
        result = env.step(joint)
        wolf_policy.observe(env, result)
        villager_policy.observe(env, result)
        if result.done:
            return env.metrics
        obs = result.observations


def episode_seed(run_seed: int, index: int) -> int:
    return derive_seed(run_seed, index)


def _run_range(env_config, wolf_policy, villager_policy, run_seed, start, stop) -> AggregateMetrics:
    needs_obs = wolf_policy.needs_observations or villager_policy.needs_observations
    env = WerewolfEnv(env_config, encode_observations=needs_obs)
    agg = AggregateMetrics()
    for i in range(start, stop):
        agg.add(play_episode(env, wolf_policy, villager_policy, episode_seed(run_seed, i)))
    return agg


def run_episodes(
    env_config: EnvConfig,
    wolf_policy,
    villager_policy,
    episodes: int,
    seed: int,
    workers: int = 1,
) -> AggregateMetrics:
    """Aggregate metrics over ``episodes`` matches.

    Episode ``i`` always uses seed ``derive_seed(seed, i)``; with ``workers > 1``
    contiguous index ranges are farmed out to processes and merged in order,
    so the counts match a single-process run.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if workers <= 1:
        return _run_range(env_config, wolf_policy, villager_policy, seed, 0, episodes)
    bounds = np.linspace(0, episodes, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_range, env_config, wolf_policy, villager_policy, seed, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        agg = AggregateMetrics()
        for f in futures:
            agg = agg.merge(f.result())
    return agg
