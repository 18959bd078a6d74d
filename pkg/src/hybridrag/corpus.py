"""Corpus ingestion and sentence-aware, token-bounded chunking."""

from __future__ import annotations

import json
import re
import string
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import IntegrityError, ParseError

Tokenizer = Callable[[str], list[str]]

_ASCII_PUNCT = frozenset(string.punctuation)
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    >>> tokenize("E5-base,  v2!")
    ['e5-base', 'v2']
    """
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


def split_sentences(text: str) -> list[str]:
    """Split after '.', '!' or '?' when followed by whitespace or end of text.

    Terminal punctuation stays with its sentence; the separating whitespace
    is dropped.
    """
    stripped = text.strip()
    if not stripped:
        return []
    return [s for s in _SENTENCE_BREAK.split(stripped) if s]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    metadata: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        row = {"doc_id": self.doc_id, "text": self.text}
        if self.metadata:
            row["metadata"] = dict(self.metadata)
        return row


@dataclass(frozen=True)
class DocumentChunk:
    chunk_id: str
    parent_doc_id: str
    ordinal: int
    text: str
    token_count: int

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "parent_doc_id": self.parent_doc_id,
            "ordinal": self.ordinal,
            "text": self.text,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, row: Mapping) -> "DocumentChunk":
        return cls(
            chunk_id=row["chunk_id"],
            parent_doc_id=row["parent_doc_id"],
            ordinal=int(row["ordinal"]),
            text=row["text"],
            token_count=int(row["token_count"]),
        )


def make_chunk_id(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}#{ordinal}"


def chunk_document(
    doc: Document, max_tokens: int = 512, tokenizer: Tokenizer = tokenize
) -> list[DocumentChunk]:
    """Greedily pack whole sentences into chunks of at most ``max_tokens`` tokens.

    A sentence that alone exceeds the budget becomes its own chunk rather than
    being split.
    """
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")

    chunks: list[DocumentChunk] = []
    current: list[str] = []
    current_tokens = 0

    def flush() -> None:
        nonlocal current, current_tokens
        text = " ".join(current)
        ordinal = len(chunks)
        chunks.append(
            DocumentChunk(
                chunk_id=make_chunk_id(doc.doc_id, ordinal),
                parent_doc_id=doc.doc_id,
                ordinal=ordinal,
                text=text,
                token_count=len(tokenizer(text)),
            )
        )
        current, current_tokens = [], 0

    for sentence in split_sentences(doc.text):
        n = len(tokenizer(sentence))
        if current and current_tokens + n > max_tokens:
            flush()
        current.append(sentence)
        current_tokens += n
    if current:
        flush()
    return chunks


def chunk_corpus(
    docs: Iterable[Document], max_tokens: int = 512, tokenizer: Tokenizer = tokenize
) -> list[DocumentChunk]:
    out: list[DocumentChunk] = []
    for doc in docs:
        out.extend(chunk_document(doc, max_tokens, tokenizer))
    return out


def _parse_document(line: str, lineno: int, path: str | None) -> Document:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from exc
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", lineno, path)
    for key in ("doc_id", "text"):
        if key not in obj:
            raise ParseError(f'missing required field "{key}"', lineno, path)
        if not isinstance(obj[key], str):
            raise ParseError(f'field "{key}" must be a string', lineno, path)
    if not obj["doc_id"]:
        raise ParseError('field "doc_id" must be non-empty', lineno, path)
    metadata = obj.get("metadata") or {}
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise ParseError('field "metadata" must be an object of strings', lineno, path)
    return Document(obj["doc_id"], obj["text"], metadata)


def ingest_corpus(lines: Iterable[str], path: str | None = None) -> list[Document]:
    """Parse a JSON-lines corpus stream. Blank lines are skipped."""
    docs: list[Document] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        doc = _parse_document(line, lineno, path)
        if doc.doc_id in seen:
            raise IntegrityError(
                f"duplicate doc_id {doc.doc_id!r} at line {lineno} "
                f"(first seen at line {seen[doc.doc_id]})"
            )
        seen[doc.doc_id] = lineno
        docs.append(doc)
    return docs


def read_corpus(path) -> list[Document]:
    with open(path, encoding="utf-8") as fh:
        return ingest_corpus(fh, path=str(path))
