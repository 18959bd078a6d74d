"""Embedding providers, an in-memory unit-vector store, and exact cosine top-k."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import DocumentChunk, Tokenizer, tokenize
from .errors import DomainError, ServiceError
from .ranking import Entry, Provenance, RankedList
from .services import JsonEndpoint
from ._io import atomic_write_bytes, atomic_write_text


class EmbeddingProvider(Protocol):
    dimension: int
    identity: str

    def embed(self, text: str) -> np.ndarray: ...


@dataclass
class HashingEmbedder:
    """Feature-hashing bag of tokens. Deterministic across processes for a given seed.

    Counts are non-negative, so cosine similarities fall in [0, 1] and texts
    whose tokens land in disjoint buckets score exactly 0.
    """

    dimension: int = 256
    seed: int = 0
    tokenizer: Tokenizer = tokenize

    @property
    def identity(self) -> str:
        return f"hashing-{self.dimension}-seed{self.seed}"

    def bucket(self, token: str) -> int:
        key = self.seed.to_bytes(8, "big", signed=True)
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for tok in self.tokenizer(text):
            vec[self.bucket(tok)] += 1.0
        return vec


@dataclass
class HttpEmbeddingProvider:
    """POST {"texts": [...]} -> {"vectors": [[...], ...]}."""

    endpoint: JsonEndpoint
    dimension: int
    identity: str = "http-embedding"

    def embed(self, text: str) -> np.ndarray:
        body = self.endpoint.post({"texts": [text]})
        try:
            vec = np.asarray(body["vectors"][0], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed embedding response: {exc}") from exc
        if vec.shape != (self.dimension,):
            raise DomainError(f"expected dimension {self.dimension}, got shape {vec.shape}")
        return vec


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DomainError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DomainError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _unit(vec: np.ndarray, what: str) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0 or not np.isfinite(norm):
        raise DomainError(f"zero or non-finite embedding for {what}")
    return vec / norm


@dataclass(frozen=True)
class DenseIndex:
    chunk_ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dimension), unit rows, read-only

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def empty(cls, dimension: int) -> "DenseIndex":
        return _frozen_index([], np.zeros((0, dimension)))

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return dict(zip(self.chunk_ids, self.matrix))

    def save(self, path: str | Path) -> None:
        """Write ``<path>.npy`` and ``<path>.ids.json``."""
        import io

        path = Path(path)
        buf = io.BytesIO()
        np.save(buf, np.ascontiguousarray(self.matrix), allow_pickle=False)
        atomic_write_bytes(path.with_suffix(".npy"), buf.getvalue())
        atomic_write_text(path.with_suffix(".ids.json"), json.dumps(list(self.chunk_ids)) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DenseIndex":
        path = Path(path)
        matrix = np.load(path.with_suffix(".npy"), allow_pickle=False)
        ids = json.loads(path.with_suffix(".ids.json").read_text(encoding="utf-8"))
        return _frozen_index(ids, matrix)


def _frozen_index(ids: Sequence[str], matrix: np.ndarray) -> DenseIndex:
    matrix = np.array(matrix, dtype=np.float64)
    matrix.setflags(write=False)
    return DenseIndex(tuple(ids), matrix)


def build_dense_index(
    chunks: Sequence[DocumentChunk],
    provider: EmbeddingProvider,
    passage_prefix: str = "",
    parallelism: int = 1,
) -> DenseIndex:
    """Embed each chunk exactly once and store the L2-normalized vectors."""
    if not chunks:
        raise DomainError("cannot build a dense index from zero chunks")
    if provider.dimension < 1:
        raise DomainError("provider dimension must be >= 1")

    def one(chunk: DocumentChunk) -> np.ndarray:
        try:
            vec = np.asarray(provider.embed(passage_prefix + chunk.text), dtype=np.float64)
        except (ServiceError, DomainError):
            raise
        except Exception as exc:
            raise ServiceError(f"embedding failed: {exc}", chunk.chunk_id) from exc
        if vec.shape != (provider.dimension,):
            raise DomainError(f"chunk {chunk.chunk_id}: embedding has shape {vec.shape}")
        return _unit(vec, f"chunk {chunk.chunk_id}")

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(one, chunks))
    else:
        rows = [one(c) for c in chunks]
    return _frozen_index([c.chunk_id for c in chunks], np.vstack(rows))


def search_dense(
    index: DenseIndex,
    query: str,
    provider: EmbeddingProvider,
    k: int = 30,
    query_prefix: str = "",
) -> RankedList:
    """Exact top-k by cosine similarity; ties by ascending chunk_id."""
    if provider.dimension != index.dimension:
        raise DomainError(f"provider dimension {provider.dimension} != index dimension {index.dimension}")
    q = _unit(np.asarray(provider.embed(query_prefix + query), dtype=np.float64), "query")
    scores = index.matrix @ q
    order = sorted(range(len(index.chunk_ids)), key=lambda i: (-scores[i], index.chunk_ids[i]))
    return RankedList(
        tuple(Entry(index.chunk_ids[i], float(scores[i]), Provenance.DENSE) for i in order[:k])
    )
