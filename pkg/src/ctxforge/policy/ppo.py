"""Clipped-surrogate policy-gradient training (PPO-style) with a value baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .mdp import N_FEATURES, Action
from .network import Adam, LossWeights, PolicyParams, ppo_loss_and_grad

log = logging.getLogger(__name__)


class Env(Protocol):
    def reset(self, rng: np.random.Generator) -> np.ndarray: ...

    def step(self, action: Action) -> tuple[np.ndarray, float, bool]: ...


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    episodes: int = 10_000
    batch_size: int = 32
    discount: float = 1.0
    seed: int = 0
    epochs: int = 4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    hidden: int = 128

    def __post_init__(self):
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be > 0")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")


@dataclass
class TrainingResult:
    params: PolicyParams
    batch_mean_returns: list[float] = field(default_factory=list)


class BanditEnv:
    """One state, one decision: Stop pays 1, every other action pays 0."""

    def __init__(self):
        self._obs = np.zeros(N_FEATURES)
        self._obs[-1] = 1.0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self._obs

    def step(self, action: Action) -> tuple[np.ndarray, float, bool]:
        return self._obs, 1.0 if Action(action) is Action.STOP else 0.0, True


def _discounted(rewards: list[float], gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def ppo_train(env: Env, cfg: PpoConfig = PpoConfig()) -> TrainingResult:
    params = PolicyParams.init(cfg.seed, hidden=cfg.hidden)
    result = TrainingResult(params)
    if cfg.episodes == 0:
        return result
    rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(cfg.learning_rate)
    weights = LossWeights(cfg.clip_epsilon, cfg.value_coef, cfg.entropy_coef)
    flat = params.flat()
    done_episodes = 0
    while done_episodes < cfg.episodes:
        n_eps = min(cfg.batch_size, cfg.episodes - done_episodes)
        xs, acts, logps, vals, rets, ep_returns = [], [], [], [], [], []
        for _ in range(n_eps):
            obs = env.reset(rng)
            rewards = []
            while True:
                probs, value = params.forward(obs[None, :])
                p = probs[0]
                a = int(rng.choice(len(p), p=p))
                xs.append(obs)
                acts.append(a)
                logps.append(math.log(max(p[a], 1e-300)))
                vals.append(float(value[0]))
                obs, reward, done = env.step(Action(a))
                rewards.append(reward)
                if done:
                    break
            rets.extend(_discounted(rewards, cfg.discount))
            ep_returns.append(sum(rewards))
        x = np.asarray(xs)
        actions = np.asarray(acts)
        old_logp = np.asarray(logps)
        returns = np.asarray(rets)
        advantages = returns - np.asarray(vals)
        for _ in range(cfg.epochs):
            loss, grad = ppo_loss_and_grad(params, x, actions, old_logp, advantages, returns, weights)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss after {done_episodes} episodes (batch mean return "
                    f"{np.mean(ep_returns):.4f}, |params| {np.linalg.norm(flat):.3e})"
                )
            flat = opt.step(flat, grad.flat())
            params = params.with_flat(flat)
        done_episodes += n_eps
        result.batch_mean_returns.append(float(np.mean(ep_returns)))
        if len(result.batch_mean_returns) % 50 == 0:
            log.info("episodes=%d mean_return=%.4f", done_episodes, result.batch_mean_returns[-1])
    result.params = params
    return result


def evaluate(
    env: Env,
    act: Callable[[np.ndarray, object], Action],
    seeds: list[int],
) -> list[float]:
    """Episode returns of ``act(features, env) -> Action``, one episode per seed."""
    out = []
    for seed in seeds:
        obs = env.reset(np.random.default_rng(seed))
        total = 0.0
        while True:
            obs, reward, done = env.step(act(obs, env))
            total += reward
            if done:
                break
        out.append(total)
    return out
