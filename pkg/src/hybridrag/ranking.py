"""Ranked candidate lists, min-max score fusion, and pointwise re-ranking."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .corpus import tokenize
from .errors import ChunkLookupError, ServiceError
from .services import JsonEndpoint


class Provenance(str, Enum):
    SPARSE = "sparse"
    DENSE = "dense"
    FUSED = "fused"
    RERANKED = "reranked"


@dataclass(frozen=True)
class Entry:
    chunk_id: str
    score: float
    provenance: Provenance

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "score": self.score, "provenance": self.provenance.value}


@dataclass(frozen=True)
class RankedList:
    """Candidates in rank order: scores non-increasing, chunk ids unique.

    ``latencies`` holds per-candidate scoring time in seconds when a stage
    records it (re-ranking); it is not part of equality or serialization.
    """

    entries: tuple[Entry, ...] = ()
    latencies: Mapping[str, float] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        prev = float("inf")
        for e in self.entries:
            if e.chunk_id in seen:
                raise ValueError(f"duplicate chunk_id {e.chunk_id!r} in ranked list")
            if e.score > prev:
                raise ValueError("ranked list scores must be non-increasing")
            seen.add(e.chunk_id)
            prev = e.score

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def chunk_ids(self) -> list[str]:
        return [e.chunk_id for e in self.entries]

    def scores(self) -> dict[str, float]:
        return {e.chunk_id: e.score for e in self.entries}

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]

    @classmethod
    def from_list(cls, rows: Iterable[Mapping]) -> "RankedList":
        return cls(tuple(Entry(r["chunk_id"], float(r["score"]), Provenance(r["provenance"])) for r in rows))


@dataclass(frozen=True)
class FusionConfig:
    k_each: int = 30
    top_n: int = 10
    w_sparse: float = 1.0
    w_dense: float = 1.0

    def __post_init__(self):
        if self.k_each < 1 or self.top_n < 1:
            raise ValueError("k_each and top_n must be positive")
        if self.top_n > 2 * self.k_each:
            raise ValueError(f"top_n ({self.top_n}) exceeds 2 * k_each ({2 * self.k_each})")
        if self.w_sparse < 0 or self.w_dense < 0:
            raise ValueError("fusion weights must be non-negative")


def min_max_normalize(scores: Sequence[float]) -> list[float]:
    """Map scores to [0, 1]; a constant list maps to all 1.0."""
    if not scores:
        return []
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    span = hi - lo
    return [(s - lo) / span for s in scores]


def _normalized(lst: RankedList) -> dict[str, float]:
    return dict(zip(lst.chunk_ids, min_max_normalize([e.score for e in lst])))


def fuse(sparse: RankedList, dense: RankedList, cfg: FusionConfig | None = None) -> RankedList:
    """Weighted CombSUM over per-list min-max normalized scores.

    Ties go to chunks present in both lists, then to the higher normalized
    sparse score (absent counts as lowest), then to ascending chunk_id.
    """
    cfg = cfg or FusionConfig()
    ns, nd = _normalized(sparse), _normalized(dense)
    fused = []
    for cid in ns.keys() | nd.keys():
        score = cfg.w_sparse * ns.get(cid, 0.0) + cfg.w_dense * nd.get(cid, 0.0)
        in_both = cid in ns and cid in nd
        fused.append((-score, not in_both, -ns.get(cid, float("-inf")), cid, score))
    fused.sort()
    return RankedList(tuple(Entry(t[3], t[4], Provenance.FUSED) for t in fused[: cfg.top_n]))


def build_rerank_prompt(query: str, passage: str) -> str:
    return "Query: " + query + " Passage: " + passage


class PassageScorer(Protocol):
    """Scores one (query, passage) pair, independent of other candidates."""

    def score(self, query: str, passage: str) -> float: ...


@dataclass
class PromptScorer:
    """Adapts a prompt -> relevance function (e.g. a generative model) to the scorer contract."""

    fn: Callable[[str], float]
    identity: str = "prompt-scorer"

    def score(self, query: str, passage: str) -> float:
        return float(self.fn(build_rerank_prompt(query, passage)))


@dataclass
class ConstantScorer:
    value: float = 0.0
    identity: str = "constant"

    def score(self, query: str, passage: str) -> float:
        return self.value


@dataclass
class TokenOverlapScorer:
    """Fraction of distinct query tokens that occur in the passage."""

    identity: str = "token-overlap"

    def score(self, query: str, passage: str) -> float:
        q = set(tokenize(query))
        if not q:
            return 0.0
        return len(q & set(tokenize(passage))) / len(q)


@dataclass
class OracleScorer:
    """Gold-aware scorer: 1.0 for passages drawn from a query's gold documents, else 0.0."""

    gold_passages: Mapping[str, frozenset[str]]
    identity: str = "oracle"

    def score(self, query: str, passage: str) -> float:
        return 1.0 if passage in self.gold_passages.get(query, ()) else 0.0


@dataclass
class HttpPassageScorer:
    endpoint: JsonEndpoint
    identity: str = "http-rerank"

    def score(self, query: str, passage: str) -> float:
        body = self.endpoint.post({"query": query, "passage": passage})
        try:
            return float(body["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed rerank response: {body!r}") from exc


def rerank(
    candidates: RankedList,
    query: str,
    scorer: PassageScorer,
    chunk_texts: Mapping[str, str],
    top_n: int = 10,
    parallelism: int = 1,
) -> RankedList:
    """Score every candidate independently, sort by score (ties keep input order), keep top_n."""
    ids = candidates.chunk_ids
    missing = [cid for cid in ids if cid not in chunk_texts]
    if missing:
        raise ChunkLookupError(f"no text for candidate chunk(s): {', '.join(missing)}")

    def one(cid: str) -> tuple[float, float]:
        start = time.perf_counter()
        try:
            s = float(scorer.score(query, chunk_texts[cid]))
        except Exception as exc:
            raise ServiceError(f"re-ranker failed: {exc}", cid) from exc
        return s, time.perf_counter() - start

    if parallelism > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(cid) for cid in ids]

    order = sorted(range(len(ids)), key=lambda i: (-results[i][0], i))[:top_n]
    return RankedList(
        tuple(Entry(ids[i], results[i][0], Provenance.RERANKED) for i in order),
        latencies={cid: lat for cid, (_, lat) in zip(ids, results)},
    )
