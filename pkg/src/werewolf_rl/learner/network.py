"""Shared villager network in plain numpy.

    obs -> tanh dense (H) -> LSTM cell (H) -> target logits (N)
                                          -> signal logits (SL x SR)
                                          -> state value (1)

Target logits of illegal seats are set to -inf before the softmax, so those
seats get probability exactly zero. Gradients are written out by hand; the
backward pass runs truncated-at-episode BPTT over padded ``(T, S, ...)``
batches.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..game import ContractError

PARAM_NAMES = ("w_in", "b_in", "w_x", "w_h", "b_lstm", "w_tgt", "b_tgt", "w_sig", "b_sig", "w_v", "b_v")


@dataclass
class PolicyParams:
    obs_width: int
    hidden: int
    num_players: int
    signal_length: int
    signal_range: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def shapes(self) -> dict[str, tuple[int, ...]]:
        d, h, n = self.obs_width, self.hidden, self.num_players
        k = self.signal_length * self.signal_range
        return {
            "w_in": (d, h), "b_in": (h,),
            "w_x": (h, 4 * h), "w_h": (h, 4 * h), "b_lstm": (4 * h,),
            "w_tgt": (h, n), "b_tgt": (n,),
            "w_sig": (h, k), "b_sig": (k,),
            "w_v": (h, 1), "b_v": (1,),
        }

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            self.obs_width, self.hidden, self.num_players, self.signal_length, self.signal_range,
            {k: v.copy() for k, v in self.arrays.items()},
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[k].ravel() for k in PARAM_NAMES])

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for k in PARAM_NAMES:
            a = self.arrays[k]
            self.arrays[k] = vec[i : i + a.size].reshape(a.shape).astype(np.float64)
            i += a.size

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays.values())


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.standard_normal((max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_params(
    obs_width: int,
    num_players: int,
    signal_length: int,
    signal_range: int,
    hidden: int = 64,
    seed: int = 0,
    head_gain: float = 0.01,
) -> PolicyParams:
    rng = np.random.default_rng(seed)
    p = PolicyParams(obs_width, hidden, num_players, signal_length, signal_range)
    h = hidden
    k = signal_length * signal_range
    w_x = np.concatenate([_orthogonal(rng, (h, h), 1.0) for _ in range(4)], axis=1)
    w_h = np.concatenate([_orthogonal(rng, (h, h), 1.0) for _ in range(4)], axis=1)
    b_lstm = np.zeros(4 * h)
    b_lstm[h : 2 * h] = 1.0  # forget gate starts open
    p.arrays = {
        "w_in": _orthogonal(rng, (obs_width, h), np.sqrt(2.0)),
        "b_in": np.zeros(h),
        "w_x": w_x,
        "w_h": w_h,
        "b_lstm": b_lstm,
        "w_tgt": _orthogonal(rng, (h, num_players), head_gain),
        "b_tgt": np.zeros(num_players),
        "w_sig": _orthogonal(rng, (h, k), head_gain) if k else np.zeros((h, 0)),
        "b_sig": np.zeros(k),
        "w_v": _orthogonal(rng, (h, 1), 1.0),
        "b_v": np.zeros(1),
    }
    return p


@dataclass
class PolicyMemory:
    """Recurrent state for a batch of agents: rows are independent."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "PolicyMemory":
        return cls(np.zeros((batch, hidden)), np.zeros((batch, hidden)))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _masked_softmax(logits: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=-1, keepdims=True)
    probs = e / s
    logp = np.where(mask, z - np.log(s), -np.inf)
    return probs, logp


def _softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=-1, keepdims=True)
    return e / s, z - np.log(s)


@dataclass
class StepOutput:
    target_probs: np.ndarray  # (B, N)
    target_logp: np.ndarray  # (B, N), -inf where illegal
    signal_probs: np.ndarray  # (B, SL, SR)
    signal_logp: np.ndarray
    value: np.ndarray  # (B,)
    memory: PolicyMemory
    cache: tuple | None = None


def step(params: PolicyParams, obs: np.ndarray, memory: PolicyMemory, legal_mask: np.ndarray,
         keep_cache: bool = False) -> StepOutput:
    a = params.arrays
    hd = params.hidden
    legal_mask = np.asarray(legal_mask, dtype=bool)
    if not legal_mask.any(axis=-1).all():
        raise ContractError("every row of legal_mask needs at least one legal target")
    x = np.asarray(obs, dtype=np.float64)
    a1 = np.tanh(x @ a["w_in"] + a["b_in"])
    gates = a1 @ a["w_x"] + memory.h @ a["w_h"] + a["b_lstm"]
    i = _sigmoid(gates[:, :hd])
    f = _sigmoid(gates[:, hd : 2 * hd])
    g = np.tanh(gates[:, 2 * hd : 3 * hd])
    o = _sigmoid(gates[:, 3 * hd :])
    c = f * memory.c + i * g
    tc = np.tanh(c)
    h = o * tc
    t_probs, t_logp = _masked_softmax(h @ a["w_tgt"] + a["b_tgt"], legal_mask)
    sl, sr = params.signal_length, params.signal_range
    s_logits = (h @ a["w_sig"] + a["b_sig"]).reshape(len(x), sl, sr)
    s_probs, s_logp = _softmax(s_logits) if sl else (s_logits, s_logits)
    value = (h @ a["w_v"] + a["b_v"])[:, 0]
    cache = (x, a1, memory.h, memory.c, i, f, g, o, tc, h) if keep_cache else None
    return StepOutput(t_probs, t_logp, s_probs, s_logp, value, PolicyMemory(h, c), cache)


def forward(params: PolicyParams, obs, memory: PolicyMemory, legal_mask):
    """Single-step policy: ``(target probs, signal probs, value, new memory)``."""
    out = step(params, np.atleast_2d(obs), memory, np.atleast_2d(legal_mask))
    return out.target_probs, out.signal_probs, out.value, out.memory


def _entropy(probs: np.ndarray, logp: np.ndarray) -> np.ndarray:
    plogp = np.where(probs > 0, probs * np.where(np.isfinite(logp), logp, 0.0), 0.0)
    return -plogp.sum(axis=-1)


@dataclass
class SequenceForward:
    """Per-step outputs over a padded batch, plus what backward needs."""

    logp: np.ndarray  # (T, S) joint log-prob of the taken action
    entropy: np.ndarray  # (T, S) target entropy + sum of signal entropies
    value: np.ndarray  # (T, S)
    outputs: list[StepOutput]


def sequence_forward(params: PolicyParams, obs, masks, targets, signals, keep_cache: bool = True) -> SequenceForward:
    """Run padded sequences ``(T, S, ...)`` from zero memory.

    Padded rows must still carry a legal mask with one allowed seat; their
    results are ignored by callers through the validity mask.
    """
    T, S = obs.shape[:2]
    mem = PolicyMemory.zeros(S, params.hidden)
    logp = np.empty((T, S))
    ent = np.empty((T, S))
    val = np.empty((T, S))
    outs = []
    rows = np.arange(S)
    sl = params.signal_length
    for t in range(T):
        out = step(params, obs[t], mem, masks[t], keep_cache)
        lp = out.target_logp[rows, targets[t]]
        e = _entropy(out.target_probs, out.target_logp)
        if sl:
            sig = signals[t]
            lp = lp + np.take_along_axis(out.signal_logp, sig[..., None], axis=-1)[..., 0].sum(axis=-1)
            e = e + _entropy(out.signal_probs, out.signal_logp).sum(axis=-1)
        logp[t], ent[t], val[t] = lp, e, out.value
        outs.append(out)
        mem = out.memory
    return SequenceForward(logp, ent, val, outs)


def sequence_backward(params: PolicyParams, fwd: SequenceForward, targets, signals,
                      d_logp, d_entropy, d_value) -> dict[str, np.ndarray]:
    """Gradients of ``sum(d_logp*logp + d_entropy*entropy + d_value*value)``."""
    a = params.arrays
    hd = params.hidden
    sl, sr = params.signal_length, params.signal_range
    grads = {k: np.zeros_like(v) for k, v in a.items()}
    T = len(fwd.outputs)
    S = d_logp.shape[1]
    rows = np.arange(S)
    dh_next = np.zeros((S, hd))
    dc_next = np.zeros((S, hd))
    for t in range(T - 1, -1, -1):
        out = fwd.outputs[t]
        x, a1, h_prev, c_prev, i, f, g, o, tc, h = out.cache
        # target head
        p = out.target_probs
        onehot = np.zeros_like(p)
        onehot[rows, targets[t]] = 1.0
        logp_safe = np.where(p > 0, out.target_logp, 0.0)
        h_t = _entropy(p, out.target_logp)
        d_tlog = d_logp[t][:, None] * (onehot - p) - d_entropy[t][:, None] * p * (logp_safe + h_t[:, None])
        grads["w_tgt"] += h.T @ d_tlog
        grads["b_tgt"] += d_tlog.sum(axis=0)
        dh = d_tlog @ a["w_tgt"].T
        if sl:
            sp = out.signal_probs
            sig_onehot = np.zeros_like(sp)
            np.put_along_axis(sig_onehot, signals[t][..., None], 1.0, axis=-1)
            h_s = _entropy(sp, out.signal_logp)
            d_slog = (d_logp[t][:, None, None] * (sig_onehot - sp)
                      - d_entropy[t][:, None, None] * sp * (out.signal_logp + h_s[..., None]))
            d_slog = d_slog.reshape(S, sl * sr)
            grads["w_sig"] += h.T @ d_slog
            grads["b_sig"] += d_slog.sum(axis=0)
            dh += d_slog @ a["w_sig"].T
        dv = d_value[t][:, None]
        grads["w_v"] += h.T @ dv
        grads["b_v"] += dv.sum(axis=0)
        dh += dv @ a["w_v"].T
        dh += dh_next
        # LSTM cell
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dgates = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1
        )
        grads["w_x"] += a1.T @ dgates
        grads["w_h"] += h_prev.T @ dgates
        grads["b_lstm"] += dgates.sum(axis=0)
        dh_next = dgates @ a["w_h"].T
        dz1 = (dgates @ a["w_x"].T) * (1.0 - a1 * a1)
        grads["w_in"] += x.T @ dz1
        grads["b_in"] += dz1.sum(axis=0)
    return grads
