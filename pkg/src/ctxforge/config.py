"""Engine configuration: every tunable knob, with canonical JSON and a digest."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .rank import PriorMode, RankConfig
from .summarize import DescentConfig, SummaryBudgets


class PolicyMode(str, enum.Enum):
    HEURISTIC = "heuristic"
    LEARNED = "learned"
    OFF = "off"


ABLATIONS = ("no-rank", "no-hier", "no-policy")


@dataclass(frozen=True)
class EngineConfig:
    token_budget: int = 1024
    alpha: float = 0.5
    buffer_n: int = 8
    top_fraction: float = 0.3
    prior_mode: PriorMode = PriorMode.CENTROID
    relevance_threshold: float = 0.55
    doc_summary_tokens: int = 24
    para_summary_tokens: int = 16
    keep_fraction: float = 0.85
    k_segments: int | str = "auto"
    max_segments: int = 2
    tau: float = 0.6
    retrieval_m: int = 3
    miss_summary_tokens: int = 24
    policy_mode: PolicyMode = PolicyMode.HEURISTIC
    lambda_cost: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "prior_mode", PriorMode(self.prior_mode))
        object.__setattr__(self, "policy_mode", PolicyMode(self.policy_mode))
        if self.token_budget < 1:
            raise ValueError("token_budget must be >= 1")
        if self.buffer_n < 1:
            raise ValueError("buffer_n must be >= 1")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")
        if not (self.k_segments == "auto" or (isinstance(self.k_segments, int) and self.k_segments >= 1)):
            raise ValueError('k_segments must be "auto" or an integer >= 1')
        if self.max_segments < 1:
            raise ValueError("max_segments must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.retrieval_m < 1 or self.miss_summary_tokens < 1:
            raise ValueError("retrieval_m and miss_summary_tokens must be >= 1")
        if self.lambda_cost < 0:
            raise ValueError("lambda_cost must be >= 0")
        # delegate the remaining range checks to the owning modules
        self.rank
        self.descent
        self.budgets

    @property
    def rank(self) -> RankConfig:
        return RankConfig(self.alpha, self.top_fraction, self.prior_mode)

    @property
    def descent(self) -> DescentConfig:
        return DescentConfig(self.relevance_threshold)

    @property
    def budgets(self) -> SummaryBudgets:
        return SummaryBudgets(self.doc_summary_tokens, self.para_summary_tokens)

    def resolve_k(self, n_docs: int) -> int:
        if self.k_segments == "auto":
            return max(1, round(n_docs**0.5))
        return int(self.k_segments)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> EngineConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> EngineConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> EngineConfig:
        return dataclasses.replace(self, **changes)

    def ablate(self, *names: str) -> EngineConfig:
        cfg = self
        for name in names:
            if name == "no-rank":
                cfg = cfg.replace(alpha=0.0, prior_mode=PriorMode.UNIFORM)
            elif name == "no-hier":
                cfg = cfg.replace(relevance_threshold=1.0)
            elif name == "no-policy":
                cfg = cfg.replace(policy_mode=PolicyMode.OFF)
            else:
                raise ValueError(f"unknown ablation {name!r}; expected one of {', '.join(ABLATIONS)}")
        return cfg
