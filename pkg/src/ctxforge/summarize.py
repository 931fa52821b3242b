"""Extractive multi-level summaries and top-down threshold descent."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .corpus import Hierarchy, HierarchyNode, Level
from .embed import cosine, embed_text


@dataclass(frozen=True)
class SummaryBudgets:
    doc_summary_tokens: int = 24
    para_summary_tokens: int = 16

    def __post_init__(self):
        if self.doc_summary_tokens < 1 or self.para_summary_tokens < 1:
            raise ValueError("summary budgets must be >= 1 token")

    def for_level(self, level: Level) -> int | None:
        if level is Level.DOCUMENT:
            return self.doc_summary_tokens
        if level is Level.PARAGRAPH:
            return self.para_summary_tokens
        return None


@dataclass(frozen=True)
class DescentConfig:
    relevance_threshold: float = 0.55

    def __post_init__(self):
        if not 0.0 <= self.relevance_threshold <= 1.0:
            raise ValueError("relevance_threshold must lie in [0, 1]")


class Representation(NamedTuple):
    """One emitted unit: a node shown either verbatim or as its summary."""

    node_id: str
    level: Level
    text: str
    token_count: int
    sentences: tuple[str, ...]


def select_sentences(
    tree: Hierarchy, node_id: str, target_tokens: int, query_vec: np.ndarray
) -> list[HierarchyNode]:
    """Greedy relevance-ordered pick of whole sentences, returned in document order."""
    if target_tokens < 1:
        raise ValueError("target_tokens must be >= 1")
    sents = tree.sentences(node_id)
    if not sents:
        raise ValueError(f"node {node_id!r} has no sentence descendants")
    order = sorted(
        range(len(sents)),
        key=lambda i: (-cosine(embed_text(sents[i].text), query_vec), i),
    )
    chosen = [order[0]]
    used = sents[order[0]].token_count
    for i in order[1:]:
        if used + sents[i].token_count > target_tokens:
            break
        chosen.append(i)
        used += sents[i].token_count
    return [sents[i] for i in sorted(chosen)]


def summarize_node(tree: Hierarchy, node_id: str, target_tokens: int, query_vec: np.ndarray) -> str:
    return " ".join(s.text for s in select_sentences(tree, node_id, target_tokens, query_vec))


def summarize_representation(
    tree: Hierarchy, node_id: str, target_tokens: int, query_vec: np.ndarray
) -> Representation:
    picked = select_sentences(tree, node_id, target_tokens, query_vec)
    return Representation(
        node_id,
        tree[node_id].level,
        " ".join(s.text for s in picked),
        sum(s.token_count for s in picked),
        tuple(s.node_id for s in picked),
    )


def sentence_representation(node: HierarchyNode) -> Representation:
    return Representation(node.node_id, node.level, node.text, node.token_count, (node.node_id,))


def resolve_context(
    tree: Hierarchy,
    query_vec: np.ndarray,
    cfg: DescentConfig,
    budgets: SummaryBudgets,
    visited: list[str] | None = None,
) -> list[Representation]:
    """Emit the coarsest representation of each subtree that clears the threshold.

    Node ids whose representation was computed are appended to ``visited``.
    """
    out: list[Representation] = []

    def walk(node_id: str) -> None:
        node = tree[node_id]
        if visited is not None:
            visited.append(node_id)
        if node.level is Level.SENTENCE:
            out.append(sentence_representation(node))
            return
        if not node.children:
            return
        rep = summarize_representation(tree, node_id, budgets.for_level(node.level), query_vec)
        if cosine(embed_text(rep.text), query_vec) >= cfg.relevance_threshold:
            out.append(rep)
            return
        for child in node.children:
            walk(child)

    walk(tree.root)
    return out


def compression_ratio(original_tokens: int, emitted_tokens: int) -> float:
    if original_tokens < 1:
        raise ValueError("original_tokens must be >= 1")
    return 1.0 - emitted_tokens / original_tokens
