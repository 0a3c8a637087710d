"""Lock-step rollouts: many matches advance together so the network runs batched.

Each match owns its generator (seeded from its episode seed), and rows of a
batch are grouped by match, so a match plays out identically whatever else
shares its batch.
"""
from __future__ import annotations

import numpy as np

from ..env import AgentAction, EnvConfig, WerewolfEnv
from ..metrics import EpisodeMetrics
from ..policies import StaticWolfPolicy, WolfPolicyKind
from ..seeding import derive_seed
from .network import PolicyMemory, PolicyParams, step
from .ppo import RolloutBuffer, Sequence


def _sample(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw along the last axis; zero-probability entries are never picked."""
    cum = np.cumsum(probs, axis=-1)
    idx = (cum < u[..., None]).sum(axis=-1)
    # round-off can leave cum[-1] just below u; fall back to the last supported entry
    last = probs.shape[-1] - 1 - np.argmax(probs[..., ::-1] > 0, axis=-1)
    return np.minimum(idx, last)


def play_batch(
    env_config: EnvConfig,
    params: PolicyParams,
    wolf_policy: WolfPolicyKind | str,
    seeds: list[int],
    record: bool = True,
) -> tuple[RolloutBuffer, list[EpisodeMetrics]]:
    """Play one match per seed with shared-parameter villagers against static wolves."""
    n = env_config.game.num_players
    sl = env_config.comm.signal_length
    kind = WolfPolicyKind(wolf_policy)
    envs = [WerewolfEnv(env_config) for _ in seeds]
    wolves = [StaticWolfPolicy(kind, sl) for _ in seeds]
    rngs = [np.random.default_rng(derive_seed(s, 1)) for s in seeds]
    obs = [env.reset(s) for env, s in zip(envs, seeds)]
    seqs: list[dict[int, Sequence]] = [{} for _ in seeds]
    h = np.zeros((len(seeds), n, params.hidden))
    c = np.zeros_like(h)
    results: list[EpisodeMetrics | None] = [None] * len(seeds)
    active = list(range(len(seeds)))

    while active:
        row_env, row_agent, spans = [], [], []
        for b in active:
            agents = envs[b].state.alive_villagers()
            spans.append((b, len(row_env), len(row_env) + len(agents)))
            row_env.extend([b] * len(agents))
            row_agent.extend(agents)
        re = np.asarray(row_env)
        ra = np.asarray(row_agent)
        x = np.stack([obs[b][a] for b, a in zip(row_env, row_agent)])
        legal = np.array([envs[b].state.alive for b in row_env], dtype=bool)
        out = step(params, x, PolicyMemory(h[re, ra], c[re, ra]), legal)
        h[re, ra] = out.memory.h
        c[re, ra] = out.memory.c

        u = np.empty((len(row_env), 1 + sl))
        for b, lo, hi in spans:
            u[lo:hi] = rngs[b].random((hi - lo, 1 + sl))
        rows = np.arange(len(row_env))
        targets = _sample(out.target_probs, u[:, 0])
        logp = out.target_logp[rows, targets]
        if sl:
            signals = _sample(out.signal_probs, u[:, 1:])
            logp = logp + np.take_along_axis(out.signal_logp, signals[..., None], axis=-1)[..., 0].sum(axis=-1)
        else:
            signals = np.zeros((len(row_env), 0), dtype=np.int64)

        still = []
        for b, lo, hi in spans:
            env = envs[b]
            joint = wolves[b].act(env, env.state.alive_wolves(), None, rngs[b])
            for r in range(lo, hi):
                joint[row_agent[r]] = AgentAction(int(targets[r]), tuple(int(s) for s in signals[r]))
            if record:
                for r in range(lo, hi):
                    seq = seqs[b].setdefault(row_agent[r], Sequence())
                    seq.obs.append(x[r])
                    seq.masks.append(legal[r])
                    seq.targets.append(int(targets[r]))
                    seq.signals.append(signals[r])
                    seq.log_probs.append(float(logp[r]))
                    seq.values.append(float(out.value[r]))
                    seq.rewards.append(0.0)
                    seq.hidden.append(out.memory.h[r])
            result = env.step(joint)
            wolves[b].observe(env, result)
            if record:
                # dead villagers still collect the terminal team reward on their last step
                for a, seq in seqs[b].items():
                    seq.rewards[-1] += float(result.rewards[a])
            if result.done:
                results[b] = env.metrics
                for seq in seqs[b].values():
                    seq.done = True
            else:
                obs[b] = result.observations
                still.append(b)
        active = still

    buffer = RolloutBuffer([s for per_env in seqs for s in per_env.values()])
    return buffer, results
