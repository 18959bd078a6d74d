"""BM25 inverted index over chunks, with optional doc2query text expansion."""

from __future__ import annotations

import hashlib
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Protocol, Sequence

from .corpus import DocumentChunk, Tokenizer, tokenize
from .errors import BuildError, ChunkLookupError, ServiceError
from .ranking import Entry, Provenance, RankedList
from .services import JsonEndpoint


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class SparseIndex:
    """Immutable BM25 index. Build with :func:`build_sparse_index`."""

    postings: Mapping[str, tuple[tuple[str, int], ...]]
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    doc_count: int
    params: Bm25Params = field(default_factory=Bm25Params)
    tokenizer: Tokenizer = field(default=tokenize, compare=False, repr=False)
    _tf: Mapping[str, Mapping[str, int]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self._tf is None:
            tf: dict[str, dict[str, int]] = {cid: {} for cid in self.doc_lengths}
            for term, plist in self.postings.items():
                for cid, n in plist:
                    tf[cid][term] = n
            object.__setattr__(self, "_tf", MappingProxyType(tf))

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.postings)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def to_dict(self) -> dict:
        return {
            "params": {"k1": self.params.k1, "b": self.params.b},
            "doc_lengths": dict(self.doc_lengths),
            "postings": {t: [list(p) for p in pl] for t, pl in self.postings.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping, tokenizer: Tokenizer = tokenize) -> "SparseIndex":
        lengths = {k: int(v) for k, v in data["doc_lengths"].items()}
        postings = {t: tuple((c, int(n)) for c, n in pl) for t, pl in data["postings"].items()}
        return _freeze(postings, lengths, Bm25Params(**data["params"]), tokenizer)


def _freeze(postings, lengths, params, tokenizer) -> SparseIndex:
    total = sum(lengths.values())
    if total == 0:
        raise BuildError("index contains no terms")
    return SparseIndex(
        postings=MappingProxyType(postings),
        doc_lengths=MappingProxyType(lengths),
        avg_doc_length=total / len(lengths),
        doc_count=len(lengths),
        params=params,
        tokenizer=tokenizer,
    )


def build_sparse_index(
    chunks: Sequence[DocumentChunk],
    params: Bm25Params | None = None,
    tokenizer: Tokenizer = tokenize,
) -> SparseIndex:
    if not chunks:
        raise BuildError("cannot build a sparse index from zero chunks")
    params = params or Bm25Params()
    lengths: dict[str, int] = {}
    postings: dict[str, list[tuple[str, int]]] = {}
    for chunk in chunks:
        if chunk.chunk_id in lengths:
            raise BuildError(f"duplicate chunk_id {chunk.chunk_id!r}")
        tokens = tokenizer(chunk.text)
        lengths[chunk.chunk_id] = len(tokens)
        for term, n in Counter(tokens).items():
            postings.setdefault(term, []).append((chunk.chunk_id, n))
    frozen = {t: tuple(pl) for t, pl in sorted(postings.items())}
    return _freeze(frozen, lengths, params, tokenizer)


def _term_weight(index: SparseIndex, tf: int, length: int) -> float:
    k1, b = index.params.k1, index.params.b
    norm = 1.0 - b + b * length / index.avg_doc_length
    return tf / (tf + k1 * norm)


def bm25_score(index: SparseIndex, query_terms: Sequence[str], chunk_id: str) -> float:
    """Lucene-style BM25: sum of idf(t) * tf / (tf + k1 * (1 - b + b * len / avglen))."""
    if chunk_id not in index.doc_lengths:
        raise ChunkLookupError(f"unknown chunk_id {chunk_id!r}")
    tf = index._tf[chunk_id]
    length = index.doc_lengths[chunk_id]
    score = 0.0
    for term in query_terms:
        n = tf.get(term, 0)
        if n:
            score += index.idf(term) * _term_weight(index, n, length)
    return score


def search_sparse(index: SparseIndex, query: str, k: int = 30) -> RankedList:
    """Top-k chunks by BM25, ties by ascending chunk_id; zero scores excluded."""
    terms = index.tokenizer(query)
    scores: dict[str, float] = {}
    # Accumulate in query-term order so sums match bm25_score bit for bit.
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for cid, n in plist:
            scores[cid] = scores.get(cid, 0.0) + idf * _term_weight(
                index, n, index.doc_lengths[cid]
            )
    ranked = sorted((item for item in scores.items() if item[1] > 0), key=lambda x: (-x[1], x[0]))
    return RankedList(tuple(Entry(cid, s, Provenance.SPARSE) for cid, s in ranked[:k]))


class QuestionGenerator(Protocol):
    def generate(self, text: str, n: int) -> list[str]: ...


_QUESTION_TEMPLATES = (
    "what is {0}?",
    "how does {0} relate to {1}?",
    "why is {0} important?",
    "where can {0} be found?",
    "who uses {0}?",
    "when did {0} happen?",
)


@dataclass
class MockQuestionGenerator:
    """Offline generator emitting template questions about words of the text.

    Output depends only on (seed, text).
    """

    seed: int = 0
    identity: str = "mock-doc2query"

    def generate(self, text: str, n: int) -> list[str]:
        words = sorted({t for t in tokenize(text) if len(t) > 3}) or ["this"]
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        out = []
        for _ in range(n):
            template = rng.choice(_QUESTION_TEMPLATES)
            out.append(template.format(rng.choice(words), rng.choice(words)))
        return out


@dataclass
class HttpQuestionGenerator:
    """Question generation through the chat-completion endpoint."""

    endpoint: JsonEndpoint
    temperature: float = 0.0
    max_tokens: int = 200
    identity: str = "http-doc2query"

    def generate(self, text: str, n: int) -> list[str]:
        prompt = (
            f"Write {n} distinct questions that the following passage answers, "
            f"one per line.\n\nPassage: {text}\n\nQuestions:"
        )
        body = self.endpoint.post(
            {"prompt": prompt, "temperature": self.temperature, "top_p": 1.0,
             "max_tokens": self.max_tokens}
        )
        lines = [re.sub(r"^\s*(?:\d+[.)]|[-*])\s*", "", ln).strip()
                 for ln in str(body.get("text", "")).splitlines()]
        return [ln for ln in lines if ln][:n]


def augment_doc2query(
    chunk: DocumentChunk,
    gen: QuestionGenerator,
    n_questions: int,
    tokenizer: Tokenizer = tokenize,
) -> DocumentChunk:
    """Append ``n_questions`` generated questions to the chunk text, one per line."""
    text = chunk.text
    if n_questions > 0:
        try:
            questions = list(gen.generate(chunk.text, n_questions))[:n_questions]
        except Exception as exc:
            raise ServiceError(f"question generation failed: {exc}", chunk.chunk_id) from exc
        if questions:
            text = chunk.text + "\n" + "\n".join(questions)
    return replace(chunk, text=text, token_count=len(tokenizer(text)))
