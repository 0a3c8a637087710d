"""Parameter checkpoints as a single ``.npz`` archive.

Layout: ``meta`` holds a JSON document (format tag, layer shapes, network
dimensions, iteration, free-form run config); ``param/<name>`` holds each
weight array and ``opt/<key>`` the optimiser moments.
"""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env import EnvConfig
from .network import PARAM_NAMES, PolicyParams
from .ppo import Adam

FORMAT = "werewolf-rl-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint cannot be read or does not fit the requested setup."""


@dataclass
class Checkpoint:
    params: PolicyParams
    iteration: int = 0
    optimizer_state: dict[str, np.ndarray] | None = None
    config: dict = field(default_factory=dict)

    def optimizer(self, learning_rate: float) -> Adam:
        opt = Adam(self.params, learning_rate)
        if self.optimizer_state is not None:
            opt.load_state_dict(self.optimizer_state)
        return opt


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> Path:
    p = ckpt.params
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "obs_width": p.obs_width,
        "hidden": p.hidden,
        "num_players": p.num_players,
        "signal_length": p.signal_length,
        "signal_range": p.signal_range,
        "shapes": {k: list(p.arrays[k].shape) for k in PARAM_NAMES},
        "iteration": int(ckpt.iteration),
        "config": ckpt.config,
    }
    arrays = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    arrays.update({f"param/{k}": p.arrays[k] for k in PARAM_NAMES})
    if ckpt.optimizer_state is not None:
        arrays.update({f"opt/{k}": v for k, v in ckpt.optimizer_state.items()})
    # write through a buffer so a failed save never leaves a truncated file behind
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | os.PathLike, env_config: EnvConfig | None = None) -> Checkpoint:
    """Read a checkpoint; with ``env_config`` also check it fits that environment."""
    try:
        with np.load(path, allow_pickle=False) as data:
            files = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "meta" not in files:
        raise CheckpointError(f"{path} has no metadata record")
    meta = json.loads(str(files["meta"]))
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} file")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')} (expected {VERSION})")

    params = PolicyParams(
        meta["obs_width"], meta["hidden"], meta["num_players"], meta["signal_length"], meta["signal_range"]
    )
    expected = params.shapes
    for k in PARAM_NAMES:
        arr = files.get(f"param/{k}")
        if arr is None:
            raise CheckpointError(f"checkpoint lacks layer {k}")
        if tuple(arr.shape) != tuple(expected[k]) or tuple(meta["shapes"][k]) != tuple(expected[k]):
            raise CheckpointError(f"layer {k} has shape {arr.shape}, expected {expected[k]}")
        params.arrays[k] = np.array(arr, dtype=np.float64)
    if not params.all_finite():
        raise CheckpointError("checkpoint holds non-finite weights")

    if env_config is not None:
        check_compatible(params, env_config)
    opt = {k[4:]: v for k, v in files.items() if k.startswith("opt/")}
    return Checkpoint(params, int(meta["iteration"]), opt or None, meta.get("config", {}))


def check_compatible(params: PolicyParams, env_config: EnvConfig) -> None:
    comm = env_config.comm
    want = {
        "obs_width": env_config.observation_width,
        "num_players": env_config.game.num_players,
        "signal_length": comm.signal_length,
        "signal_range": comm.signal_range,
    }
    got = {k: getattr(params, k) for k in want}
    bad = [f"{k}: checkpoint {got[k]}, config {want[k]}" for k in want if got[k] != want[k]]
    if bad:
        raise CheckpointError("checkpoint does not match the configuration (" + "; ".join(bad) + ")")
