"""Clipped-surrogate policy optimisation over recurrent rollouts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..game import ConfigError, ContractError
from .network import PolicyParams, sequence_backward, sequence_forward


@dataclass(frozen=True)
class PPOConfig:
    clip_epsilon: float = 0.2
    c1: float = 0.5
    c2: float = 0.01
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 1e-3
    epochs_per_iteration: int = 4
    minibatch_size: int = 256
    rollout_episodes_per_iteration: int = 128
    max_grad_norm: float = 0.5
    hidden: int = 64
    # rewards are multiplied by this before returns and advantages are formed
    reward_scale: float = 0.04

    def __post_init__(self):
        if not 0 < self.clip_epsilon < 1:
            raise ConfigError(f"clip_epsilon must lie in (0, 1), got {self.clip_epsilon}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("c1 and c2 must be non-negative")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        for name in ("epochs_per_iteration", "minibatch_size", "rollout_episodes_per_iteration", "hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.reward_scale <= 0:
            raise ConfigError("reward_scale must be positive")


@dataclass
class Sequence:
    """One villager's trajectory over the phases it was alive for."""

    obs: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray] = field(default_factory=list)
    targets: list[int] = field(default_factory=list)
    signals: list[np.ndarray] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    hidden: list[np.ndarray] = field(default_factory=list)
    done: bool = False

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class RolloutBuffer:
    sequences: list[Sequence] = field(default_factory=list)
    # filled by compute_returns_and_advantages, aligned with to_batch() padding
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def to_batch(self, signal_length: int) -> "Batch":
        return Batch.from_sequences(self.sequences, signal_length)


@dataclass
class Batch:
    obs: np.ndarray  # (T, S, D)
    masks: np.ndarray  # (T, S, N) bool
    targets: np.ndarray  # (T, S) int
    signals: np.ndarray  # (T, S, SL) int
    old_log_probs: np.ndarray  # (T, S)
    values: np.ndarray  # (T, S)
    rewards: np.ndarray  # (T, S)
    valid: np.ndarray  # (T, S) bool
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    @classmethod
    def from_sequences(cls, seqs: list[Sequence], signal_length: int) -> "Batch":
        if not seqs:
            raise ContractError("empty rollout buffer")
        T = max(len(s) for s in seqs)
        S = len(seqs)
        D = len(seqs[0].obs[0])
        N = len(seqs[0].masks[0])
        obs = np.zeros((T, S, D))
        masks = np.ones((T, S, N), dtype=bool)
        targets = np.zeros((T, S), dtype=np.int64)
        signals = np.zeros((T, S, signal_length), dtype=np.int64)
        logp = np.zeros((T, S))
        values = np.zeros((T, S))
        rewards = np.zeros((T, S))
        valid = np.zeros((T, S), dtype=bool)
        for j, s in enumerate(seqs):
            n = len(s)
            obs[:n, j] = s.obs
            masks[:n, j] = s.masks
            targets[:n, j] = s.targets
            if signal_length:
                signals[:n, j] = s.signals
            logp[:n, j] = s.log_probs
            values[:n, j] = s.values
            rewards[:n, j] = s.rewards
            valid[:n, j] = True
        return cls(obs, masks, targets, signals, logp, values, rewards, valid)

    def select(self, cols: np.ndarray) -> "Batch":
        t = int(self.valid[:, cols].sum(axis=0).max())
        pick = lambda a: None if a is None else a[:t, cols]
        return Batch(*(pick(getattr(self, f)) for f in (
            "obs", "masks", "targets", "signals", "old_log_probs", "values", "rewards", "valid",
            "returns", "advantages")))

    @property
    def num_sequences(self) -> int:
        return self.obs.shape[1]


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Generalised advantage estimates for one finished trajectory."""
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        next_value = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv


def compute_returns_and_advantages(batch: Batch, config: PPOConfig, normalize: bool = True,
                                   sequences: list[Sequence] | None = None) -> Batch:
    """Annotate ``batch`` with discounted returns and (normalised) GAE advantages.

    Both are in units of ``reward_scale`` times the environment reward, which
    is also the scale the value head learns.
    """
    if sequences is not None and not all(s.done for s in sequences):
        raise ContractError("rollout buffer holds an unfinished episode")
    T, S = batch.valid.shape
    returns = np.zeros((T, S))
    adv = np.zeros((T, S))
    lengths = batch.valid.sum(axis=0)
    rewards = batch.rewards * config.reward_scale
    for j in range(S):
        n = lengths[j]
        returns[:n, j] = discounted_returns(rewards[:n, j], config.gamma)
        adv[:n, j] = gae(rewards[:n, j], batch.values[:n, j], config.gamma, config.gae_lambda)
    if normalize:
        v = adv[batch.valid]
        std = v.std()
        adv = np.where(batch.valid, (adv - v.mean()) / (std if std > 0 else 1.0), 0.0)
    batch.returns = returns
    batch.advantages = adv
    return batch


def clipped_surrogate(ratio, advantage, epsilon: float):
    """``min(r*A, clip(r, 1-eps, 1+eps)*A)`` and its derivative in ``r``."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    unclipped = ratio * advantage
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage
    value = np.minimum(unclipped, clipped)
    grad = np.where(unclipped <= clipped, advantage, 0.0)
    return value, grad


@dataclass
class ObjectiveResult:
    objective: float
    grads: dict[str, np.ndarray]
    surrogate: float
    value_loss: float
    entropy: float
    clip_fraction: float
    excluded: int


def ppo_objective(params: PolicyParams, batch: Batch, config: PPOConfig,
                  old_log_probs: np.ndarray | None = None, with_grad: bool = True) -> ObjectiveResult:
    """Mean over valid samples of ``surrogate - c1 * (V - R)^2 + c2 * entropy``.

    The objective is meant to be ascended. Samples whose probability ratio is
    not finite (old probability zero) are left out and counted in ``excluded``.
    """
    if batch.advantages is None or batch.returns is None:
        raise ContractError("batch needs returns and advantages; call compute_returns_and_advantages")
    old = batch.old_log_probs if old_log_probs is None else old_log_probs
    fwd = sequence_forward(params, batch.obs, batch.masks, batch.targets, batch.signals, keep_cache=with_grad)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(fwd.logp - old)
    ok = batch.valid & np.isfinite(ratio)
    excluded = int((batch.valid & ~ok).sum())
    m = max(int(ok.sum()), 1)
    ratio = np.where(ok, ratio, 1.0)
    adv = np.where(ok, batch.advantages, 0.0)
    surr, d_ratio = clipped_surrogate(ratio, adv, config.clip_epsilon)
    verr = fwd.value - batch.returns
    ent = np.where(ok, fwd.entropy, 0.0)
    surr_mean = float(surr[ok].sum() / m)
    vloss = float((verr[ok] ** 2).sum() / m)
    ent_mean = float(ent.sum() / m)
    objective = surr_mean - config.c1 * vloss + config.c2 * ent_mean
    clip_frac = float((np.abs(ratio - 1.0)[ok] > config.clip_epsilon).sum() / m)
    grads = {}
    if with_grad:
        okf = ok.astype(np.float64)
        d_logp = okf * d_ratio * ratio / m
        d_ent = okf * config.c2 / m
        d_val = okf * (-2.0 * config.c1 * verr) / m
        grads = sequence_backward(params, fwd, batch.targets, batch.signals, d_logp, d_ent, d_val)
    return ObjectiveResult(objective, grads, surr_mean, vloss, ent_mean, clip_frac, excluded)


class Adam:
    """Adam that ascends: ``step`` moves parameters along the gradient."""

    def __init__(self, params: PolicyParams, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}

    def step(self, params: PolicyParams, grads: dict[str, np.ndarray], max_norm: float | None = None) -> float:
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        scale = 1.0
        if max_norm is not None and norm > max_norm:
            scale = max_norm / (norm + 1e-12)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            g = g * scale
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params.arrays[k] = params.arrays[k] + self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return norm

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"t": np.array(self.t)}
        out.update({f"m.{k}": v for k, v in self.m.items()})
        out.update({f"v.{k}": v for k, v in self.v.items()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        for k in self.m:
            self.m[k] = np.array(state[f"m.{k}"], dtype=np.float64)
            self.v[k] = np.array(state[f"v.{k}"], dtype=np.float64)
