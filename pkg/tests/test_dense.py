import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridrag.corpus import DocumentChunk
from hybridrag.dense import (
    DenseIndex,
    HashingEmbedder,
    build_dense_index,
    cosine_similarity,
    search_dense,
)
from hybridrag.errors import DomainError, ServiceError
from hybridrag.ranking import Provenance


def chunk(cid, text):
    return DocumentChunk(cid, cid, 0, text, len(text.split()))


CHUNKS = [
    chunk("c1", "lighthouse on the northern cape"),
    chunk("c2", "cheese aged in limestone caves"),
    chunk("c3", "comet returns every seventy one years"),
    chunk("c4", "bridge main span six hundred meters"),
    chunk("c5", "lighthouse tours and coastal walks"),
]


class CountingEmbedder(HashingEmbedder):
    calls = 0

    def embed(self, text):
        type(self).calls += 1
        return super().embed(text)


def test_cosine_examples():
    assert cosine_similarity([3.0, 4.0], [3.0, 4.0]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_cosine_errors():
    with pytest.raises(DomainError):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(DomainError):
        cosine_similarity([1, 0, 0], [1, 0])


vecs = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)


@given(u=vecs, v=vecs, alpha=st.floats(0.01, 100))
def test_cosine_symmetric_and_scale_invariant(u, v, alpha):
    c = cosine_similarity(u, v)
    assert -1.0 <= c <= 1.0
    assert c == pytest.approx(cosine_similarity(v, u), abs=1e-12)
    assert c == pytest.approx(cosine_similarity([alpha * x for x in u], v), abs=1e-9)


def test_build_counts_calls_and_normalizes():
    CountingEmbedder.calls = 0
    idx = build_dense_index(CHUNKS[:3], CountingEmbedder(64, seed=1))
    assert CountingEmbedder.calls == 3
    assert len(idx.chunk_ids) == 3
    assert np.allclose(np.linalg.norm(idx.matrix, axis=1), 1.0, atol=1e-6)
    with pytest.raises(ValueError):
        idx.matrix[0, 0] = 5.0


def test_build_is_deterministic():
    e = HashingEmbedder(64, seed=5)
    a, b = build_dense_index(CHUNKS, e), build_dense_index(CHUNKS, e)
    assert a.chunk_ids == b.chunk_ids
    assert np.array_equal(a.matrix, b.matrix)


def test_zero_embedding_names_chunk():
    with pytest.raises(DomainError, match="c9"):
        build_dense_index([chunk("c9", "...")], HashingEmbedder(16))


def test_provider_failure_is_service_error():
    class Broken:
        dimension, identity = 4, "broken"

        def embed(self, text):
            raise RuntimeError("down")

    with pytest.raises(ServiceError) as err:
        build_dense_index([chunk("c1", "x")], Broken())
    assert err.value.context == "c1"


def test_self_similarity_ranks_first():
    e = HashingEmbedder(128, seed=2)
    idx = build_dense_index(CHUNKS, e)
    res = search_dense(idx, CHUNKS[2].text, e)
    assert res.chunk_ids[0] == "c3"
    assert res.entries[0].score == pytest.approx(1.0)
    assert all(x.provenance is Provenance.DENSE for x in res)


def test_k_larger_than_index():
    e = HashingEmbedder(128, seed=2)
    idx = build_dense_index(CHUNKS, e)
    res = search_dense(idx, "lighthouse", e, k=50)
    assert sorted(res.chunk_ids) == sorted(c.chunk_id for c in CHUNKS)


def test_matches_brute_force_cosine():
    e = HashingEmbedder(32, seed=9)
    idx = build_dense_index(CHUNKS, e)
    query = "coastal lighthouse walks on the cape"
    brute = sorted(
        ((c.chunk_id, cosine_similarity(e.embed(query), e.embed(c.text))) for c in CHUNKS),
        key=lambda x: (-round(x[1], 12), x[0]),
    )
    res = search_dense(idx, query, e, k=5)
    assert res.chunk_ids == [cid for cid, _ in brute]
    for got, (_, s) in zip(res, brute):
        assert got.score == pytest.approx(s, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 5), k2=st.integers(1, 5), query=st.sampled_from(["lighthouse", "cheese caves", "span"]))
def test_prefix_property(k, k2, query):
    e = HashingEmbedder(32, seed=9)
    idx = build_dense_index(CHUNKS, e)
    lo, hi = sorted((k, k2))
    assert search_dense(idx, query, e, lo).chunk_ids == search_dense(idx, query, e, hi).chunk_ids[:lo]


def test_dimension_mismatch():
    idx = build_dense_index(CHUNKS, HashingEmbedder(32))
    with pytest.raises(DomainError):
        search_dense(idx, "x", HashingEmbedder(16))


def test_hashing_disjoint_buckets_zero_similarity():
    e = HashingEmbedder(64, seed=0)
    a, b = "lighthouse", "cheese"
    assert e.bucket(a) != e.bucket(b)
    assert cosine_similarity(e.embed(a), e.embed(b)) == 0.0


def test_prefixes_are_applied():
    seen = []

    class Recorder(HashingEmbedder):
        def embed(self, text):
            seen.append(text)
            return super().embed(text)

    e = Recorder(16)
    idx = build_dense_index(CHUNKS[:1], e, passage_prefix="passage: ")
    search_dense(idx, "q", e, query_prefix="query: ")
    assert seen == ["passage: " + CHUNKS[0].text, "query: q"]


def test_snapshot_round_trip(tmp_path):
    e = HashingEmbedder(32)
    idx = build_dense_index(CHUNKS, e, parallelism=3)
    idx.save(tmp_path / "dense")
    again = DenseIndex.load(tmp_path / "dense")
    assert again.chunk_ids == idx.chunk_ids
    assert np.array_equal(again.matrix, idx.matrix)
    empty = DenseIndex.empty(32)
    empty.save(tmp_path / "empty")
    assert len(search_dense(DenseIndex.load(tmp_path / "empty"), "x", e)) == 0
