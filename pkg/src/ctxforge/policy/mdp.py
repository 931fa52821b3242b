"""Compression as a decision process over one document hierarchy.

A state assigns every node a status. The visible representation is read off
the tree top-down: a Pruned node shows nothing, a Summarized node shows its
level summary, a Full sentence shows itself and a Full inner node shows
whatever its children show.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from ..corpus import Hierarchy, Level
from ..embed import embed_text
from ..rank import relevance
from ..summarize import Representation, SummaryBudgets, summarize_representation


class Status(enum.IntEnum):
    FULL = 0
    SUMMARIZED = 1
    PRUNED = 2


class Action(enum.IntEnum):
    PRUNE_LOWEST_SCORE = 0
    SUMMARIZE_LARGEST = 1
    DESCEND_LOWEST_SCORE = 2
    STOP = 3


N_ACTIONS = len(Action)
N_FEATURES = 16


class MdpError(ValueError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    lambda_cost: float = 0.1

    def __post_init__(self):
        if self.lambda_cost < 0:
            raise ValueError("lambda_cost must be >= 0")


@dataclass
class CompressionState:
    node_status: dict[str, Status]
    remaining_budget: int
    query_vec: np.ndarray
    budget: int
    steps: int = 0
    # nodes expanded by DescendLowestScore; never summarized again
    locked: frozenset[str] = field(default_factory=frozenset)
    terminal: bool = False

    @property
    def tokens_used(self) -> int:
        return self.budget - self.remaining_budget

    def copy(self) -> CompressionState:
        return CompressionState(
            dict(self.node_status),
            self.remaining_budget,
            self.query_vec,
            self.budget,
            self.steps,
            self.locked,
            self.terminal,
        )


class Unit(NamedTuple):
    node_id: str
    status: Status
    tokens: int
    score: float
    sentences: tuple[str, ...]


class CompressionProblem:
    """Everything about an episode that does not change between steps.

    ``critical`` maps planted critical sentence ids to nothing in particular;
    only its keys matter. Their quality weight is their relevance to the
    query (uniform when every weight is zero).
    """

    def __init__(
        self,
        tree: Hierarchy,
        query_vec: np.ndarray,
        budget: int,
        budgets: SummaryBudgets,
        reward_cfg: RewardConfig,
        critical: Mapping[str, object] | None = None,
    ):
        if budget < 1:
            raise ValueError("budget must be >= 1 token")
        self.tree = tree
        self.query_vec = query_vec
        self.budget = budget
        self.budgets = budgets
        self.reward_cfg = reward_cfg
        self.max_steps = 3 * len(tree) + 1
        self.summary: dict[str, Representation] = {}
        self.score: dict[str, float] = {}
        self.summary_score: dict[str, float] = {}
        self.level_sizes = [0, 0, 0]
        for node in tree:
            self.level_sizes[node.level] += 1
            if node.level is Level.SENTENCE:
                self.score[node.node_id] = relevance(embed_text(node.text), query_vec)
        for node in tree:
            if node.level is not Level.SENTENCE and node.children:
                rep = summarize_representation(
                    tree, node.node_id, budgets.for_level(node.level), query_vec
                )
                self.summary[node.node_id] = rep
                self.summary_score[node.node_id] = relevance(embed_text(rep.text), query_vec)
        self.original_tokens = tree.root_node.token_count
        crit = [s for s in (critical or {}) if s in tree.nodes]
        weights = {s: self.score[s] for s in crit}
        if crit and sum(weights.values()) <= 0:
            weights = {s: 1.0 for s in crit}
        self.critical_weights = weights

    # state construction -------------------------------------------------

    def initial_state(self, statuses: Mapping[str, Status] | None = None) -> CompressionState:
        status = {nid: Status.FULL for nid in self.tree.nodes}
        if statuses:
            status.update(statuses)
        state = CompressionState(status, 0, self.query_vec, self.budget)
        self.check(state)
        state.remaining_budget = self.budget - self.tokens(state)
        return state

    def state_from_representations(self, reps: list[Representation]) -> CompressionState:
        statuses = {}
        shown = set()
        for rep in reps:
            if rep.level is not Level.SENTENCE:
                statuses[rep.node_id] = Status.SUMMARIZED
            shown.add(rep.node_id)
        for nid in self.tree.nodes:
            node = self.tree[nid]
            if node.level is Level.SENTENCE and nid not in shown and not self._under(nid, shown):
                statuses[nid] = Status.PRUNED
        return self.initial_state(statuses)

    def _under(self, nid: str, ancestors: set[str]) -> bool:
        parent = self.tree[nid].parent
        while parent is not None:
            if parent in ancestors:
                return True
            parent = self.tree[parent].parent
        return False

    def check(self, state: CompressionState) -> None:
        if set(state.node_status) != set(self.tree.nodes):
            raise MdpError("state does not match the tree's node set")
        for nid, st in state.node_status.items():
            if st is not Status.FULL:
                for d in self.tree.descendants(nid):
                    if state.node_status[d] is not Status.FULL:
                        raise MdpError(f"{nid} and its descendant {d} both carry a non-Full status")
            if st is Status.SUMMARIZED and nid not in self.summary:
                raise MdpError(f"sentence or empty node {nid} cannot be Summarized")

    # reading a state ----------------------------------------------------

    def units(self, state: CompressionState) -> list[Unit]:
        """Visible representation units in document order."""
        out: list[Unit] = []
        status = state.node_status
        tree = self.tree

        def walk(nid: str) -> None:
            st = status[nid]
            if st is Status.PRUNED:
                return
            if st is Status.SUMMARIZED:
                rep = self.summary[nid]
                out.append(Unit(nid, st, rep.token_count, self.summary_score[nid], rep.sentences))
                return
            node = tree[nid]
            if node.level is Level.SENTENCE:
                out.append(Unit(nid, st, node.token_count, self.score[nid], (nid,)))
                return
            for c in node.children:
                walk(c)

        walk(tree.root)
        return out

    def expandable(self, state: CompressionState) -> list[str]:
        """Visible Full inner nodes that may still be summarized."""
        out = []
        status = state.node_status

        def walk(nid: str) -> None:
            if status[nid] is not Status.FULL:
                return
            node = self.tree[nid]
            if node.level is Level.SENTENCE:
                return
            if nid in self.summary and nid not in state.locked:
                out.append(nid)
            for c in node.children:
                walk(c)

        walk(self.tree.root)
        return out

    def tokens(self, state: CompressionState) -> int:
        return sum(u.tokens for u in self.units(state))

    def subtree_tokens(self, state: CompressionState, nid: str) -> int:
        st = state.node_status[nid]
        if st is Status.PRUNED:
            return 0
        if st is Status.SUMMARIZED:
            return self.summary[nid].token_count
        node = self.tree[nid]
        if node.level is Level.SENTENCE:
            return node.token_count
        return sum(self.subtree_tokens(state, c) for c in node.children)

    def represented(self, state: CompressionState) -> set[str]:
        return {s for u in self.units(state) for s in u.sentences}

    def quality(self, state: CompressionState) -> float:
        if not self.critical_weights:
            return 1.0
        shown = self.represented(state)
        total = sum(self.critical_weights.values())
        return sum(w for s, w in self.critical_weights.items() if s in shown) / total

    def terminal_reward(self, state: CompressionState) -> float:
        lam = self.reward_cfg.lambda_cost
        used = self.tokens(state)
        if used > self.budget:
            return -lam
        return self.quality(state) - lam * used / self.budget

    def features(self, state: CompressionState) -> np.ndarray:
        f = np.zeros(N_FEATURES)
        counts = np.zeros((3, 3))
        for nid, st in state.node_status.items():
            counts[self.tree[nid].level, st] += 1
        sizes = np.array(self.level_sizes, dtype=float)
        f[:9] = (counts / np.maximum(sizes, 1)[:, None]).ravel()
        f[9] = np.clip(state.remaining_budget / self.budget, -2.0, 1.0)
        f[10] = state.tokens_used / max(self.original_tokens, 1)
        scores = [u.score for u in self.units(state)]
        if scores:
            f[11], f[12], f[13] = np.mean(scores), max(scores), min(scores)
        f[14] = state.steps / self.max_steps
        f[15] = 1.0
        if not np.all(np.isfinite(f)):
            raise MdpError("non-finite state features")
        return f


def mdp_step(
    state: CompressionState, action: Action, problem: CompressionProblem
) -> tuple[CompressionState, float, bool]:
    """Apply ``action``; returns (next_state, reward, terminal).

    Rewards are 0 except on the terminal transition. Episodes end on Stop,
    on the step horizon, or when an action pushes a within-budget context
    over the budget.
    """
    if state.terminal:
        raise MdpError("episode already terminated")
    problem.check(state)
    action = Action(action)
    nxt = state.copy()
    nxt.steps += 1
    was_within = state.remaining_budget >= 0

    if action is Action.STOP:
        nxt.terminal = True
        return nxt, problem.terminal_reward(nxt), True

    changed = False
    if action is Action.PRUNE_LOWEST_SCORE:
        units = problem.units(state)
        if units:
            target = min(units, key=lambda u: (u.score, u.node_id))
            nxt.node_status[target.node_id] = Status.PRUNED
            changed = True
    elif action is Action.SUMMARIZE_LARGEST:
        cands = problem.expandable(state)
        if cands:
            target = min(cands, key=lambda n: (-problem.subtree_tokens(state, n), n))
            for d in problem.tree.descendants(target):
                nxt.node_status[d] = Status.FULL
            nxt.node_status[target] = Status.SUMMARIZED
            changed = True
    elif action is Action.DESCEND_LOWEST_SCORE:
        summarized = [u for u in problem.units(state) if u.status is Status.SUMMARIZED]
        if summarized:
            target = min(summarized, key=lambda u: (u.score, u.node_id))
            nxt.node_status[target.node_id] = Status.FULL
            nxt.locked = state.locked | {target.node_id}
            changed = True

    if changed:
        nxt.remaining_budget = problem.budget - problem.tokens(nxt)
    overflow = changed and was_within and nxt.remaining_budget < 0
    if overflow or nxt.steps >= problem.max_steps:
        nxt.terminal = True
        return nxt, problem.terminal_reward(nxt), True
    return nxt, 0.0, False


def heuristic_policy(state: CompressionState) -> Action:
    if state.remaining_budget < 0:
        return Action.PRUNE_LOWEST_SCORE
    if state.tokens_used > 0.9 * state.budget:
        return Action.SUMMARIZE_LARGEST
    return Action.STOP


def run_episode(problem: CompressionProblem, state: CompressionState, choose) -> tuple[CompressionState, float]:
    """Roll ``choose(state, problem) -> Action`` to termination; returns (final state, return)."""
    total = 0.0
    while True:
        state, reward, done = mdp_step(state, choose(state, problem), problem)
        total += reward
        if done:
            return state, total
