import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridrag.dense import HashingEmbedder
from hybridrag.errors import ChunkLookupError, DomainError
from hybridrag.metrics import (
    average_precision,
    bleu,
    brevity_penalty,
    lcs_length,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
    refusal_rate,
    rouge_l,
    rouge_n,
    semantic_similarity,
    to_doc_ranking,
)
from hybridrag.ranking import Entry, Provenance, RankedList


def ranked(ids):
    return RankedList(tuple(Entry(c, float(len(ids) - i), Provenance.FUSED) for i, c in enumerate(ids)))


# brute-force oracles written from the textbook definitions
def ap_oracle(ranking, rel):
    precs = [sum(d in rel for d in ranking[: i + 1]) / (i + 1) for i, d in enumerate(ranking) if d in rel]
    return sum(precs) / len(rel)


def ndcg_oracle(ranking, rel, k):
    gains = [1.0 if d in rel else 0.0 for d in ranking[:k]]
    dcg = sum(g / np.log2(i + 2) for i, g in enumerate(gains))
    ideal = sorted([1.0] * len(rel) + [0.0] * k, reverse=True)[:k]
    return dcg / sum(g / np.log2(i + 2) for i, g in enumerate(ideal))


def lcs_oracle(a, b):
    # exhaustive over subsequences of the shorter sequence
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for size in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), size):
            sub = [short[i] for i in idx]
            it = iter(long_)
            if all(tok in it for tok in sub):
                return size
    return 0


def test_worked_examples():
    assert average_precision(["d1", "x", "d2"], {"d1", "d2"}) == pytest.approx(5 / 6, abs=1e-12)
    assert reciprocal_rank(["a", "b", "c", "g"], {"g"}) == 0.25
    assert ndcg_at_k(["x", "g"], {"g"}, 10) == pytest.approx(1 / math.log2(3), abs=1e-12)
    assert round(ndcg_at_k(["x", "g"], {"g"}, 10), 4) == 0.6309
    assert recall_at_k(["a", "g1", "b"], {"g1", "g2"}, 10) == 0.5
    assert precision_at_k(["g1"], {"g1"}, 10) == 0.1
    assert precision_at_k(["g1", "x"], {"g1"}, 1) == 1.0


def test_empty_relevant_and_bad_k():
    for fn in (average_precision, reciprocal_rank):
        with pytest.raises(DomainError):
            fn(["a"], set())
    with pytest.raises(DomainError):
        recall_at_k(["a"], {"a"}, 0)


def test_to_doc_ranking():
    parent = {"a#0": "a", "a#1": "a", "b#0": "b"}
    assert to_doc_ranking(ranked(["a#1", "b#0", "a#0"]), parent) == ["a", "b"]
    with pytest.raises(ChunkLookupError):
        to_doc_ranking(ranked(["zz#0"]), parent)


docs = st.sampled_from([f"d{i}" for i in range(12)])


@given(st.lists(docs, unique=True, max_size=12), st.sets(docs, min_size=1, max_size=6), st.integers(1, 12))
def test_ranking_metrics_match_oracles_and_bounds(ranking, rel, k):
    ap = average_precision(ranking, rel)
    assert ap == pytest.approx(ap_oracle(ranking, rel), abs=1e-12)
    assert ndcg_at_k(ranking, rel, k) == pytest.approx(ndcg_oracle(ranking, rel, k), abs=1e-12)
    for v in (ap, reciprocal_rank(ranking, rel), ndcg_at_k(ranking, rel, k),
              recall_at_k(ranking, rel, k), precision_at_k(ranking, rel, k)):
        assert 0.0 <= v <= 1.0
    if ranking and ranking[0] in rel:
        assert reciprocal_rank(ranking, rel) == 1.0


def test_rouge_examples():
    r = rouge_n("the cat", "the cat sat", 1)
    assert r.recall == pytest.approx(2 / 3) and r.precision == 1.0
    assert rouge_n("The cat!", "the cat", 1).recall == 1.0
    assert rouge_l("a b d", "a b c d").recall == 0.75
    assert rouge_n("", "x").recall == 0.0


words = st.lists(st.sampled_from(list("abcde")), max_size=7)


@given(words, words)
def test_lcs_oracle_and_symmetry(a, b):
    assert lcs_length(a, b) == lcs_oracle(a, b) == lcs_length(b, a)
    ca, cb = " ".join(a), " ".join(b)
    assert rouge_l(ca, cb).f1 == pytest.approx(rouge_l(cb, ca).f1, abs=1e-12)
    for v in (*rouge_n(ca, cb), *rouge_l(ca, cb), bleu(ca, cb)):
        assert 0.0 <= v <= 1.0 + 1e-12


def test_bleu():
    assert bleu("the quick brown fox jumps", "the quick brown fox jumps") == pytest.approx(1.0)
    assert bleu("hi there", "hi there") == pytest.approx(1.0)
    assert bleu("", "x") == 0.0
    assert brevity_penalty(1, 2) == pytest.approx(math.exp(-1))
    assert brevity_penalty(3, 2) == 1.0
    assert 0 < bleu("the cat", "the cat sat on the mat") < 1


def test_semantic_similarity():
    emb = HashingEmbedder(64)
    assert semantic_similarity("same words", "same words", emb) == pytest.approx(1.0)
    assert semantic_similarity("", "x", emb) == 0.0


def test_refusal_rate():
    rows = [SimpleNamespace(is_refusal=i < 17) for i in range(100)]
    assert refusal_rate(rows) == 0.17
    with pytest.raises(DomainError):
        refusal_rate([])
