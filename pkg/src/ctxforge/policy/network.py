"""Two-hidden-layer tanh perceptron with a categorical action head and a value head.

Persisted layout (all little-endian)::

    b"CTXPOL01"
    uint32 input_dim, hidden1, hidden2, n_actions
    float32 layer1 W (input_dim x hidden1, row-major), layer1 b (hidden1)
    float32 layer2 W (hidden1 x hidden2), layer2 b (hidden2)
    float32 action head W (hidden2 x n_actions), action head b (n_actions)
    float32 value head W (hidden2 x 1), value head b (1)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mdp import N_ACTIONS, N_FEATURES

MAGIC = b"CTXPOL01"
LAYOUT = ("w1", "b1", "w2", "b2", "wa", "ba", "wv", "bv")


@dataclass
class PolicyParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wa: np.ndarray
    ba: np.ndarray
    wv: np.ndarray
    bv: np.ndarray

    @classmethod
    def init(
        cls, seed: int, input_dim: int = N_FEATURES, hidden: int = 128, n_actions: int = N_ACTIONS,
        hidden2: int | None = None,
    ) -> PolicyParams:
        """Uniform(+-1/sqrt(fan_in)) initialisation from one seeded generator."""
        rng = np.random.default_rng(seed)
        h2 = hidden if hidden2 is None else hidden2

        def layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
            lim = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-lim, lim, (fan_in, fan_out)), rng.uniform(-lim, lim, fan_out)

        w1, b1 = layer(input_dim, hidden)
        w2, b2 = layer(hidden, h2)
        wa, ba = layer(h2, n_actions)
        wv, bv = layer(h2, 1)
        return cls(w1, b1, w2, b2, wa, ba, wv, bv)

    @classmethod
    def zeros(cls, input_dim: int = N_FEATURES, hidden: int = 128, n_actions: int = N_ACTIONS) -> PolicyParams:
        return cls(
            np.zeros((input_dim, hidden)), np.zeros(hidden),
            np.zeros((hidden, hidden)), np.zeros(hidden),
            np.zeros((hidden, n_actions)), np.zeros(n_actions),
            np.zeros((hidden, 1)), np.zeros(1),
        )

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1], self.wa.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, k) for k in LAYOUT]

    def copy(self) -> PolicyParams:
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> PolicyParams:
        out, i = [], 0
        for a in self.arrays():
            out.append(vec[i : i + a.size].reshape(a.shape).copy())
            i += a.size
        return PolicyParams(*out)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Action probabilities and value estimates for a (batch, features) array."""
        cache = _forward(self, np.atleast_2d(x))
        return cache["probs"], cache["value"]

    # persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<4I", *self.dims)]
        parts += [np.ascontiguousarray(a, dtype="<f4").tobytes() for a in self.arrays()]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> PolicyParams:
        if blob[:8] != MAGIC:
            raise ValueError("not a policy blob (bad magic)")
        d_in, h1, h2, n_act = struct.unpack_from("<4I", blob, 8)
        shapes = [(d_in, h1), (h1,), (h1, h2), (h2,), (h2, n_act), (n_act,), (h2, 1), (1,)]
        off = 24
        arrays = []
        for shape in shapes:
            n = int(np.prod(shape))
            arrays.append(np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64).reshape(shape))
            off += 4 * n
        if off != len(blob):
            raise ValueError(f"policy blob has {len(blob) - off} trailing bytes")
        return cls(*arrays)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> PolicyParams:
        return cls.from_bytes(Path(path).read_bytes())


def _forward(p: PolicyParams, x: np.ndarray) -> dict:
    h1 = np.tanh(x @ p.w1 + p.b1)
    h2 = np.tanh(h1 @ p.w2 + p.b2)
    logits = h2 @ p.wa + p.ba
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(logp)
    value = (h2 @ p.wv + p.bv)[:, 0]
    return {"x": x, "h1": h1, "h2": h2, "logp": logp, "probs": probs, "value": value}


@dataclass(frozen=True)
class LossWeights:
    clip_epsilon: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01


def ppo_loss_and_grad(
    p: PolicyParams,
    x: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    w: LossWeights = LossWeights(),
) -> tuple[float, PolicyParams]:
    """Clipped-surrogate loss plus value and entropy terms, with analytic gradients."""
    c = _forward(p, x)
    n = x.shape[0]
    idx = np.arange(n)
    logp_a = c["logp"][idx, actions]
    ratio = np.exp(logp_a - old_logp)
    clipped = np.clip(ratio, 1.0 - w.clip_epsilon, 1.0 + w.clip_epsilon)
    s1, s2 = ratio * advantages, clipped * advantages
    policy_loss = -np.mean(np.minimum(s1, s2))
    value_loss = np.mean((c["value"] - returns) ** 2)
    probs, logp = c["probs"], c["logp"]
    entropy = -(probs * logp).sum(axis=1)
    loss = policy_loss + w.value_coef * value_loss - w.entropy_coef * entropy.mean()

    g_logp_a = np.where(s1 <= s2, -ratio * advantages, 0.0) / n
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    d_logits = g_logp_a[:, None] * (onehot - probs)
    d_entropy = -probs * (logp + entropy[:, None])
    d_logits += -w.entropy_coef / n * d_entropy
    d_value = 2.0 * w.value_coef * (c["value"] - returns) / n

    h1, h2 = c["h1"], c["h2"]
    g_wa = h2.T @ d_logits
    g_ba = d_logits.sum(axis=0)
    g_wv = h2.T @ d_value[:, None]
    g_bv = np.array([d_value.sum()])
    d_h2 = d_logits @ p.wa.T + d_value[:, None] @ p.wv.T
    d_pre2 = d_h2 * (1.0 - h2**2)
    g_w2 = h1.T @ d_pre2
    g_b2 = d_pre2.sum(axis=0)
    d_pre1 = (d_pre2 @ p.w2.T) * (1.0 - h1**2)
    g_w1 = x.T @ d_pre1
    g_b1 = d_pre1.sum(axis=0)
    return float(loss), PolicyParams(g_w1, g_b1, g_w2, g_b2, g_wa, g_ba, g_wv, g_bv)


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
