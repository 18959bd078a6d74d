"""Ranked-retrieval metrics over binary document relevance, and text-overlap metrics.

Text metrics share the corpus tokenizer (lowercased, punctuation-stripped).
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Collection, Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import Tokenizer, tokenize
from .dense import EmbeddingProvider, cosine_similarity
from .errors import ChunkLookupError, DomainError, ServiceError
from .ranking import RankedList

BLEU_EPSILON = 1e-9
BLEU_MAX_ORDER = 4


def to_doc_ranking(ranked: RankedList, chunk_parent: Mapping[str, str]) -> list[str]:
    """Document ids ordered by each document's best-ranked chunk."""
    out: list[str] = []
    seen: set[str] = set()
    for cid in ranked.chunk_ids:
        try:
            doc = chunk_parent[cid]
        except KeyError:
            raise ChunkLookupError(f"chunk {cid!r} has no parent document") from None
        if doc not in seen:
            seen.add(doc)
            out.append(doc)
    return out


def _check(relevant: Collection[str]) -> None:
    if not relevant:
        raise DomainError("relevant set must be non-empty")


def average_precision(ranking: Sequence[str], relevant: Collection[str]) -> float:
    _check(relevant)
    hits = 0
    total = 0.0
    for i, doc in enumerate(ranking, start=1):
        if doc in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def reciprocal_rank(ranking: Sequence[str], relevant: Collection[str]) -> float:
    _check(relevant)
    for i, doc in enumerate(ranking, start=1):
        if doc in relevant:
            return 1.0 / i
    return 0.0


def ndcg_at_k(ranking: Sequence[str], relevant: Collection[str], k: int = 10) -> float:
    _check(relevant)
    dcg = sum(1.0 / math.log2(i + 1) for i, doc in enumerate(ranking[:k], start=1) if doc in relevant)
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal


def recall_at_k(ranking: Sequence[str], relevant: Collection[str], k: int) -> float:
    _check(relevant)
    if k < 1:
        raise DomainError("k must be >= 1")
    return len(set(ranking[:k]) & set(relevant)) / len(relevant)


def precision_at_k(ranking: Sequence[str], relevant: Collection[str], k: int) -> float:
    """Hits in the top k over k; the denominator stays k when fewer are retrieved."""
    _check(relevant)
    if k < 1:
        raise DomainError("k must be >= 1")
    return len(set(ranking[:k]) & set(relevant)) / k


def retrieval_scores(ranking: Sequence[str], relevant: Collection[str]) -> dict[str, float]:
    return {
        "map": average_precision(ranking, relevant),
        "mrr": reciprocal_rank(ranking, relevant),
        "ndcg_at_10": ndcg_at_k(ranking, relevant, 10),
        "recall_at_1": recall_at_k(ranking, relevant, 1),
        "recall_at_10": recall_at_k(ranking, relevant, 10),
        "prec_at_1": precision_at_k(ranking, relevant, 1),
        "prec_at_10": precision_at_k(ranking, relevant, 10),
    }


class PRF(NamedTuple):
    recall: float
    precision: float
    f1: float


def _prf(overlap: int, ref_total: int, cand_total: int) -> PRF:
    recall = overlap / ref_total if ref_total else 0.0
    precision = overlap / cand_total if cand_total else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return PRF(recall, precision, f1)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int = 1, tokenizer: Tokenizer = tokenize) -> PRF:
    if n < 1:
        raise DomainError("n must be >= 1")
    cand = _ngrams(tokenizer(candidate), n)
    ref = _ngrams(tokenizer(reference), n)
    overlap = sum((cand & ref).values())
    return _prf(overlap, sum(ref.values()), sum(cand.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, tokenizer: Tokenizer = tokenize) -> PRF:
    cand, ref = tokenizer(candidate), tokenizer(reference)
    return _prf(lcs_length(cand, ref), len(ref), len(cand))


def brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu(candidate: str, reference: str, tokenizer: Tokenizer = tokenize) -> float:
    """Sentence BLEU with epsilon smoothing of zero match counts.

    The maximum n-gram order is capped at the shorter text's length (at most 4)
    so that identical short texts still score 1.0.
    """
    cand, ref = tokenizer(candidate), tokenizer(reference)
    if not cand or not ref:
        return 0.0
    order = min(BLEU_MAX_ORDER, len(cand), len(ref))
    log_sum = 0.0
    for n in range(1, order + 1):
        c, r = _ngrams(cand, n), _ngrams(ref, n)
        matched = sum((c & r).values()) or BLEU_EPSILON
        log_sum += math.log(matched / sum(c.values()))
    return brevity_penalty(len(cand), len(ref)) * math.exp(log_sum / order)


def semantic_similarity(candidate: str, reference: str, provider: EmbeddingProvider) -> float:
    """Cosine of the two embeddings; 0.0 if either text embeds to the zero vector."""
    try:
        u = np.asarray(provider.embed(candidate), dtype=np.float64)
        v = np.asarray(provider.embed(reference), dtype=np.float64)
    except ServiceError:
        raise
    except Exception as exc:
        raise ServiceError(f"similarity embedding failed: {exc}") from exc
    if not u.any() or not v.any():
        return 0.0
    return cosine_similarity(u, v)


def refusal_rate(results: Sequence) -> float:
    """Fraction of results flagged ``is_refusal``."""
    if not results:
        raise DomainError("refusal rate of an empty result list is undefined")
    return sum(1 for r in results if r.is_refusal) / len(results)
