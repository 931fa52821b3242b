"""Slow, independent reference implementations used as test oracles.

Everything here is written from the written rules with plain Python loops
and shares no code with the package beyond the tokenizer's regex.
"""

from __future__ import annotations

import math
import re

DIM = 256


def tokens(text):
    return re.findall(r"[^\W_]+", text.lower())


def fnv1a64(s):
    h = 14695981039346656037
    for b in s.encode("utf-8"):
        h = ((h ^ b) * 1099511628211) % (1 << 64)
    return h


def embed(text):
    tf = {}
    for t in tokens(text):
        tf[t] = tf.get(t, 0) + 1
    v = [0.0] * DIM
    for t in sorted(tf):
        v[fnv1a64(t) % DIM] += math.log(1 + tf[t])
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v] if n else v


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return max(-1.0, min(1.0, sum(x * y for x, y in zip(a, b)) / (na * nb)))


def rho(a, b):
    return max(0.0, cos(a, b))


def score(s, queries, prior, alpha):
    rt = sum(rho(s, q) for q in queries) / len(queries) if queries else 0.0
    return alpha * rt + (1 - alpha) * prior


def centroid(vectors):
    m = [sum(col) / len(vectors) for col in zip(*vectors)]
    n = math.sqrt(sum(x * x for x in m))
    return [x / n for x in m] if n else m


def evict_prefix(entries, need, pinned=()):
    """entries: list of (node_id, tokens, score). Sort, then scan."""
    if need <= 0:
        return []
    pool = [e for e in entries if e[0] not in pinned]
    # ascending score, then descending node id: sort twice (stable)
    pool.sort(key=lambda e: e[0], reverse=True)
    pool.sort(key=lambda e: e[2])
    out, freed = [], 0
    for e in pool:
        if freed >= need:
            break
        out.append(e[0])
        freed += e[1]
    if freed < need:
        return None
    return out


def greedy_summary(sentences, target, q):
    """sentences: list of (text, n_tokens) in document order; returns chosen indices."""
    rel = [cos(embed(t), q) for t, _ in sentences]
    order = sorted(range(len(sentences)), key=lambda i: (-rel[i], i))
    chosen, used = [order[0]], sentences[order[0]][1]
    for i in order[1:]:
        if used + sentences[i][1] > target:
            break
        chosen.append(i)
        used += sentences[i][1]
    return sorted(chosen)


def sqdist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def kmeans_labels(points, k, seed):
    """k-means++ seeding and Lloyd iterations drawn from numpy's default_rng(seed)
    in the same order as the documented rule; loops are pure Python."""
    import numpy as np

    rng = np.random.default_rng(seed)
    n = len(points)
    k = min(k, n)
    centers = [list(points[int(rng.integers(n))])]
    while len(centers) < k:
        d2 = [min(sqdist(p, c) for c in centers) for p in points]
        tot = sum(d2)
        if tot <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=np.array(d2) / np.sum(d2)))
        centers.append(list(points[idx]))

    def assign(cs):
        out = []
        for p in points:
            ds = [sqdist(p, c) for c in cs]
            out.append(ds.index(min(ds)))
        return out

    labels = assign(centers)
    for _ in range(50):
        own = [sqdist(points[i], centers[labels[i]]) for i in range(n)]
        taken = set()
        for j in range(k):
            members = [points[i] for i in range(n) if labels[i] == j]
            if members:
                centers[j] = [sum(col) / len(members) for col in zip(*members)]
            else:
                far = max((i for i in range(n) if i not in taken), key=lambda i: (own[i], -i))
                taken.add(far)
                centers[j] = list(points[far])
        new = assign(centers)
        if new == labels:
            break
        labels = new
    return labels


class ToyMdp:
    """Plain-dict re-statement of the compression MDP rules for tiny trees.

    ``tree``: node_id -> (text, children); sentences have no children. Inner
    nodes are summarized by ``greedy_summary`` at the given per-node budget.
    """

    PRUNE, SUMMARIZE, DESCEND, STOP = 0, 1, 2, 3

    def __init__(self, tree, root, q, budget, lam, summary_budget, critical):
        self.tree, self.root, self.q, self.budget, self.lam = tree, root, q, budget, lam
        self.ntok = {n: len(tokens(t)) for n, (t, _) in tree.items()}
        self.rel = {n: rho(embed(t), q) for n, (t, ch) in tree.items() if not ch}
        self.summ = {}
        for n, (_, ch) in tree.items():
            if ch:
                leaves = self.leaves(n)
                pick = greedy_summary([(tree[s][0], self.ntok[s]) for s in leaves], summary_budget[n], q)
                chosen = [leaves[i] for i in pick]
                text = " ".join(tree[s][0] for s in chosen)
                self.summ[n] = (sum(self.ntok[s] for s in chosen), rho(embed(text), q), chosen)
        w = {s: self.rel[s] for s in critical}
        if sum(w.values()) <= 0:
            w = {s: 1.0 for s in critical}
        self.w = w

    def leaves(self, n):
        ch = self.tree[n][1]
        return [n] if not ch else [x for c in ch for x in self.leaves(c)]

    def units(self, st):
        out = []

        def walk(n):
            s = st[n]
            if s == "P":
                return
            if s == "S":
                tok, sc, covered = self.summ[n]
                out.append((n, "S", tok, sc, covered))
            elif not self.tree[n][1]:
                out.append((n, "F", self.ntok[n], self.rel[n], [n]))
            else:
                for c in self.tree[n][1]:
                    walk(c)

        walk(self.root)
        return out

    def used(self, st):
        return sum(u[2] for u in self.units(st))

    def reward(self, st):
        used = self.used(st)
        if used > self.budget:
            return -self.lam
        shown = {s for u in self.units(st) for s in u[4]}
        q = sum(w for s, w in self.w.items() if s in shown) / sum(self.w.values()) if self.w else 1.0
        return q - self.lam * used / self.budget

    def subtree(self, st, n):
        if st[n] == "P":
            return 0
        if st[n] == "S":
            return self.summ[n][0]
        if not self.tree[n][1]:
            return self.ntok[n]
        return sum(self.subtree(st, c) for c in self.tree[n][1])

    def run(self, actions):
        """Per-step (reward, terminal) pairs until termination or the actions run out."""
        st = {n: "F" for n in self.tree}
        locked = set()
        steps = 0
        out = []
        max_steps = 3 * len(self.tree) + 1
        for a in actions:
            steps += 1
            within = self.used(st) <= self.budget
            if a == self.STOP:
                out.append((self.reward(st), True))
                return out, st
            changed = False
            if a == self.PRUNE:
                us = self.units(st)
                if us:
                    st[min(us, key=lambda u: (u[3], u[0]))[0]] = "P"
                    changed = True
            elif a == self.SUMMARIZE:
                cands = []

                def walk(n):
                    if st[n] != "F" or not self.tree[n][1]:
                        return
                    if n not in locked:
                        cands.append(n)
                    for c in self.tree[n][1]:
                        walk(c)

                walk(self.root)
                if cands:
                    t = min(cands, key=lambda n: (-self.subtree(st, n), n))
                    for d in self.leaves(t) + [x for x in self.tree if x != t and t in self.ancestors(x)]:
                        st[d] = "F"
                    st[t] = "S"
                    changed = True
            elif a == self.DESCEND:
                ss = [u for u in self.units(st) if u[1] == "S"]
                if ss:
                    t = min(ss, key=lambda u: (u[3], u[0]))[0]
                    st[t] = "F"
                    locked.add(t)
                    changed = True
            over = self.used(st) > self.budget
            if (changed and within and over) or steps >= max_steps:
                out.append((self.reward(st), True))
                return out, st
            out.append((0.0, False))
        return out, st

    def ancestors(self, n):
        out = set()
        for p, (_, ch) in self.tree.items():
            if n in ch:
                out |= {p} | self.ancestors(p)
        return out
