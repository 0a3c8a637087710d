"""Experiment configuration: nested YAML tree, flag overrides, resolved manifests.

Precedence for every field is command-line flag, then (for the seed only) the
``WEREWOLF_RL_SEED`` environment variable, then the config file, then the
built-in default.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .env import CommSpec, EnvConfig, RewardConfig
from .game import ConfigError, GameConfig
from .learner.ppo import PPOConfig
from .policies import WolfPolicyKind

SEED_ENV_VAR = "WEREWOLF_RL_SEED"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    iterations: int = 300
    eval_episodes: int = 2000
    workers: int = 1
    out: str = "runs/latest"

    def validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    game: GameConfig = field(default_factory=GameConfig)
    comm: CommSpec = field(default_factory=CommSpec)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    wolf_policy: str = WolfPolicyKind.RANDOM.value
    ppo: PPOConfig = field(default_factory=PPOConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        try:
            WolfPolicyKind(self.wolf_policy)
        except ValueError:
            kinds = ", ".join(k.value for k in WolfPolicyKind)
            raise ConfigError(f"wolf_policy must be one of {kinds}, got {self.wolf_policy!r}") from None
        if self.comm.signal_range > self.game.num_players:
            raise ConfigError(f"signal range {self.comm.signal_range} exceeds N={self.game.num_players}")
        self.comm.validate(self.game.num_players)
        self.rewards.validate()
        self.run.validate()
        if self.ppo.gamma != self.rewards.gamma:
            raise ConfigError("ppo.gamma and rewards.gamma must agree")

    @property
    def env(self) -> EnvConfig:
        return EnvConfig(self.game, self.comm, self.rewards)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, section: str | None = None, **changes) -> "ExperimentConfig":
        if section is None:
            return dataclasses.replace(self, **changes)
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


_SECTIONS = {"game": GameConfig, "comm": CommSpec, "rewards": RewardConfig, "ppo": PPOConfig, "run": RunConfig}


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        if isinstance(default, bool) or not isinstance(default, (int, float)):
            kwargs[k] = v
        elif isinstance(default, int):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{where}.{k} must be an integer, got {v!r}")
            kwargs[k] = v
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}.{k} must be a number, got {v!r}")
            kwargs[k] = float(v)
    return cls(**kwargs)


def from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(_SECTIONS) - {"wolf_policy"})
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    parts = {name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    rewards = parts["rewards"]
    # gamma is one number shared by the reward definition and the learner
    if "gamma" in (data.get("ppo") or {}) and "gamma" not in (data.get("rewards") or {}):
        rewards = dataclasses.replace(rewards, gamma=parts["ppo"].gamma)
    parts["ppo"] = dataclasses.replace(parts["ppo"], gamma=rewards.gamma)
    parts["rewards"] = rewards
    return ExperimentConfig(wolf_policy=data.get("wolf_policy", WolfPolicyKind.RANDOM.value), **parts)


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return from_dict(data)


def seed_from_env(environ=None) -> int | None:
    raw = (os.environ if environ is None else environ).get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None


def dump_manifest(config: ExperimentConfig, path: str | os.PathLike, extra: dict | None = None) -> None:
    doc = config.to_dict()
    if extra:
        doc["meta"] = extra
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_manifest(path: str | os.PathLike) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    data.pop("meta", None)
    return from_dict(data)
