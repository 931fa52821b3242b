"""The standard compression training environment.

Each episode picks a document from a synthetic corpus, starts from the
threshold-descent representation built against the corpus centroid and asks
the agent to fit it under a randomly drawn budget. Quality counts planted
critical sentences weighted by their relevance to the centroid.

Not re-exported from ``ctxforge.policy`` because it depends on the build
pipeline, which itself imports the policy package.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..acc import corpus_centroid
from ..config import EngineConfig
from ..corpus import CorpusStore, Hierarchy
from ..summarize import resolve_context
from ..syncorpus import CorpusSpec, generate
from .agent import policy_act
from .mdp import Action, CompressionProblem, CompressionState, RewardConfig, heuristic_policy, mdp_step
from .network import PolicyParams


@dataclass(frozen=True)
class EnvConfig:
    corpus_seeds: tuple[int, ...] = (0, 1, 2)
    budget_low: float = 0.3
    budget_high: float = 1.0

    def __post_init__(self):
        if not self.corpus_seeds:
            raise ValueError("corpus_seeds must not be empty")
        if not 0.0 < self.budget_low <= self.budget_high:
            raise ValueError("need 0 < budget_low <= budget_high")


@dataclass(frozen=True)
class _Episode:
    tree: Hierarchy
    centroid: np.ndarray
    critical: dict[str, str]


class CompressionEnv:
    """Gym-style wrapper around the compression decision process."""

    def __init__(
        self,
        env_cfg: EnvConfig = EnvConfig(),
        engine_cfg: EngineConfig = EngineConfig(),
        spec: CorpusSpec | None = None,
    ):
        self.env_cfg = env_cfg
        self.engine_cfg = engine_cfg
        self.reward_cfg = RewardConfig(engine_cfg.lambda_cost)
        self.pool: list[_Episode] = []
        for seed in env_cfg.corpus_seeds:
            corpus = generate(replace(spec, seed=seed) if spec else CorpusSpec.standard(seed))
            store = CorpusStore.from_documents(corpus.documents)
            centroid = corpus_centroid(store)
            for doc_id, tree in store.hierarchies.items():
                self.pool.append(_Episode(tree, centroid, corpus.critical_in([doc_id])))
        self._start: dict[int, list] = {}
        self.problem: CompressionProblem | None = None
        self.state: CompressionState | None = None

    def _representations(self, i: int):
        if i not in self._start:
            ep = self.pool[i]
            cfg = self.engine_cfg
            self._start[i] = resolve_context(ep.tree, ep.centroid, cfg.descent, cfg.budgets)
        return self._start[i]

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        i = int(rng.integers(len(self.pool)))
        frac = rng.uniform(self.env_cfg.budget_low, self.env_cfg.budget_high)
        ep = self.pool[i]
        reps = self._representations(i)
        budget = max(1, round(frac * sum(r.token_count for r in reps)))
        self.problem = CompressionProblem(
            ep.tree, ep.centroid, budget, self.engine_cfg.budgets, self.reward_cfg, ep.critical
        )
        self.state = self.problem.state_from_representations(reps)
        return self.problem.features(self.state)

    def step(self, action: Action) -> tuple[np.ndarray, float, bool]:
        self.state, reward, done = mdp_step(self.state, action, self.problem)
        return self.problem.features(self.state), reward, done


def heuristic_act(features: np.ndarray, env: CompressionEnv) -> Action:
    return heuristic_policy(env.state)


def learned_act(params: PolicyParams):
    def act(features: np.ndarray, env: CompressionEnv) -> Action:
        return policy_act(params, env.state, env.problem, deterministic=True)

    return act


def held_out_seeds(n: int, offset: int = 1_000_000) -> Sequence[int]:
    return list(range(offset, offset + n))
