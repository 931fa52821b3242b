"""Per-document compression: rank and prune sentences, descend, then run the policy.

Corpus-wide statistics (centroid, pruning cut-off, per-document budget) are
computed once by :func:`compute_build_state` so a single document can be
recompressed later without touching the rest of the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import EngineConfig, PolicyMode
from .corpus import CorpusStore, Hierarchy, Level
from .embed import embed_text, normalized_mean
from .policy.agent import policy_act
from .policy.mdp import CompressionProblem, RewardConfig, Status, heuristic_policy, run_episode
from .policy.network import PolicyParams
from .rank import QueryBuffer, ScoredSnippet, offline_prior, select_top_fraction, snippet_score
from .summarize import Representation, resolve_context, sentence_representation


def f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class BuildState:
    centroid: np.ndarray
    cutoff_score: float
    cutoff_node: str
    doc_budget: int

    def keeps(self, score: float, node_id: str) -> bool:
        """Whether a sentence with this score survives top-fraction pruning."""
        return (-score, node_id) <= (-self.cutoff_score, self.cutoff_node)


@dataclass
class DocCompression:
    doc_id: str
    representations: list[Representation]
    visited: list[str] = field(default_factory=list)
    pruned_tree: Hierarchy | None = None


def cold_score(vec: np.ndarray, centroid: np.ndarray, cfg: EngineConfig) -> float:
    prior = offline_prior(vec, centroid, cfg.prior_mode)
    return f32(snippet_score(vec, QueryBuffer(cfg.buffer_n), prior, cfg.alpha))


def corpus_centroid(store: CorpusStore) -> np.ndarray:
    vecs = [embed_text(s.text) for h in store.hierarchies.values() for s in h.sentences()]
    return np.float32(normalized_mean(vecs)).astype(np.float64)


def compute_build_state(store: CorpusStore, cfg: EngineConfig) -> BuildState:
    if len(store) == 0:
        raise ValueError("cannot compress an empty corpus")
    centroid = corpus_centroid(store)
    scored = [
        ScoredSnippet(s.node_id, cold_score(embed_text(s.text), centroid, cfg))
        for h in store.hierarchies.values()
        for s in h.sentences()
    ]
    kept = select_top_fraction(scored, cfg.top_fraction)
    cutoff = kept[-1] if kept else ScoredSnippet("", float("-inf"))
    doc_budget = max(1, cfg.token_budget // len(store))
    return BuildState(centroid, cutoff.score, cutoff.node_id, doc_budget)


def prune_tree(tree: Hierarchy, state: BuildState, cfg: EngineConfig) -> Hierarchy:
    keep = {
        s.node_id
        for s in tree.sentences()
        if state.keeps(cold_score(embed_text(s.text), state.centroid, cfg), s.node_id)
    }
    return tree.restrict(keep)


def compress_document(
    tree: Hierarchy,
    state: BuildState,
    cfg: EngineConfig,
    policy: PolicyParams | None = None,
) -> DocCompression:
    pruned = prune_tree(tree, state, cfg)
    visited: list[str] = []
    reps = resolve_context(pruned, state.centroid, cfg.descent, cfg.budgets, visited)
    if cfg.policy_mode is not PolicyMode.OFF and reps:
        reps = apply_policy(pruned, reps, state, cfg, policy)
    return DocCompression(tree.doc_id, reps, visited, pruned)


def apply_policy(
    tree: Hierarchy,
    reps: list[Representation],
    state: BuildState,
    cfg: EngineConfig,
    policy: PolicyParams | None,
) -> list[Representation]:
    problem = CompressionProblem(
        tree, state.centroid, state.doc_budget, cfg.budgets, RewardConfig(cfg.lambda_cost)
    )
    start = problem.state_from_representations(reps)
    if cfg.policy_mode is PolicyMode.LEARNED:
        if policy is None:
            raise ValueError("policy_mode 'learned' needs trained policy parameters")
        final, _ = run_episode(problem, start, lambda s, p: policy_act(policy, s, p, deterministic=True))
    else:
        final, _ = run_episode(problem, start, lambda s, p: heuristic_policy(s))
    return representations_of(problem, final)


def representations_of(problem: CompressionProblem, state) -> list[Representation]:
    out = []
    for unit in problem.units(state):
        if unit.status is Status.SUMMARIZED:
            out.append(problem.summary[unit.node_id])
        else:
            out.append(sentence_representation(problem.tree[unit.node_id]))
    return out


def emitted_level_counts(reps: list[Representation]) -> dict[str, int]:
    counts = {lvl.name.lower(): 0 for lvl in Level}
    for r in reps:
        counts[r.level.name.lower()] += 1
    return counts
