"""IDF-based token truncation (a model-free stand-in for saliency scores)."""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Mapping

from ..corpus import tokenize
from ..rank import retain_count

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been before being
    below between both but by can could did do does doing down during each few for from further
    had has have having he her here hers herself him himself his how i if in into is it its itself
    just me more most my myself no nor not now of off on once only or other our ours ourselves out
    over own same she should so some such than that the their theirs them themselves then there
    these they this those through to too under until up very was we were what when where which
    while who whom why will with would you your yours yourself yourselves
    """.split()
)


def idf_table(texts: Iterable[str]) -> dict[str, float]:
    """Smoothed inverse document frequency, ``log((1 + n) / (1 + df)) + 1``."""
    df: Counter[str] = Counter()
    n = 0
    for text in texts:
        n += 1
        df.update(set(tokenize(text)))
    return {tok: math.log((1 + n) / (1 + c)) + 1.0 for tok, c in df.items()}


def truncate_tokens(
    text: str,
    keep_fraction: float,
    idf: Mapping[str, float],
    default_idf: float | None = None,
) -> str:
    """Drop the lowest-IDF tokens, keeping ``ceil(keep_fraction * n)`` in original order.

    Stopwords rank below everything else. Tokens missing from ``idf`` get
    ``default_idf`` (the table maximum when not given). Kept tokens are
    rejoined with single spaces, so the output is in lowercase token form.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    if keep_fraction == 1.0:
        return text
    toks = tokenize(text)
    if not toks:
        return text
    if default_idf is None:
        default_idf = max(idf.values(), default=1.0)

    def weight(tok: str) -> float:
        return 0.0 if tok in STOPWORDS else idf.get(tok, default_idf)

    keep = retain_count(len(toks), keep_fraction)
    order = sorted(range(len(toks)), key=lambda i: (-weight(toks[i]), i))
    survivors = sorted(order[:keep])
    return " ".join(toks[i] for i in survivors)
