"""Synthetic QA records, category taxonomies, and stratification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .errors import ChunkLookupError, IntegrityError, ParseError, ValidationError

FULL_COMBINATION = "full-combination"


@dataclass(frozen=True)
class Dimension:
    name: str
    categories: tuple[tuple[str, float], ...]

    @property
    def category_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.categories)


@dataclass(frozen=True)
class CategoryTaxonomy:
    dimensions: tuple[Dimension, ...] = ()

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValidationError("dimension names must be unique")
        for dim in self.dimensions:
            cats = dim.category_names
            if not cats:
                raise ValidationError(f"dimension {dim.name!r} has no categories")
            if len(set(cats)) != len(cats):
                raise ValidationError(f"duplicate category in dimension {dim.name!r}")
            total = math.fsum(p for _, p in dim.categories)
            if abs(total - 1.0) > 1e-9 or any(p < 0 for _, p in dim.categories):
                raise ValidationError(
                    f"probabilities of dimension {dim.name!r} sum to {total}, expected 1"
                )

    def __getitem__(self, name: str) -> Dimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise ChunkLookupError(f"unknown dimension {name!r}")

    @property
    def dimension_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def to_dict(self) -> dict:
        return {
            "dimensions": [
                {"name": d.name, "categories": [{"name": c, "probability": p} for c, p in d.categories]}
                for d in self.dimensions
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CategoryTaxonomy":
        dims = []
        for d in data.get("dimensions", []):
            cats = tuple((c["name"], float(c["probability"])) for c in d["categories"])
            dims.append(Dimension(d["name"], cats))
        return cls(tuple(dims))


def default_taxonomy() -> CategoryTaxonomy:
    """Four question dimensions plus user expertise, with their target shares."""
    return CategoryTaxonomy((
        Dimension("factuality", (("factoid", 0.5), ("open-ended", 0.5))),
        Dimension("premise", (("direct", 0.5), ("with-premise", 0.5))),
        Dimension("phrasing", (
            ("concise-natural", 0.25),
            ("verbose-natural", 0.25),
            ("short-search", 0.25),
            ("long-search", 0.25),
        )),
        Dimension("linguistic-variation", (("similar", 0.5), ("distant", 0.5))),
        Dimension("user-expertise", (("expert", 0.8), ("novice", 0.2))),
    ))


def load_taxonomy(path: str | Path) -> CategoryTaxonomy:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if "taxonomy" in data:
        data = data["taxonomy"]
    return CategoryTaxonomy.from_dict(data)


def combination_count(taxonomy: CategoryTaxonomy) -> int:
    return math.prod(len(d.categories) for d in taxonomy.dimensions)


@dataclass(frozen=True)
class QaRecord:
    question_id: str
    question: str
    gold_answer: str
    gold_doc_ids: tuple[str, ...]
    labels: Mapping[str, str] = field(default_factory=dict)

    def combination(self, taxonomy: CategoryTaxonomy) -> tuple[str, ...]:
        return tuple(self.labels[name] for name in taxonomy.dimension_names)

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "gold_doc_ids": list(self.gold_doc_ids),
            "labels": dict(self.labels),
        }


def validate_record(record: QaRecord, taxonomy: CategoryTaxonomy) -> None:
    if not record.gold_doc_ids:
        raise ValidationError(f"record {record.question_id!r}: gold_doc_ids is empty")
    for dim_name, cat in record.labels.items():
        try:
            dim = taxonomy[dim_name]
        except ChunkLookupError:
            raise ValidationError(
                f"record {record.question_id!r}: unknown dimension {dim_name!r}"
            ) from None
        if cat not in dim.category_names:
            raise ValidationError(
                f"record {record.question_id!r}: category {cat!r} is not in dimension {dim_name!r}"
            )
    missing = [d for d in taxonomy.dimension_names if d not in record.labels]
    if missing:
        raise ValidationError(
            f"record {record.question_id!r}: missing label(s) for {', '.join(missing)}"
        )


def _parse_record(line: str, lineno: int, path: str | None) -> QaRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from exc
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", lineno, path)
    for key in ("question_id", "question", "gold_answer"):
        if not isinstance(obj.get(key), str):
            raise ParseError(f'field "{key}" must be a string', lineno, path)
    gold = obj.get("gold_doc_ids")
    if not isinstance(gold, list) or not all(isinstance(g, str) for g in gold):
        raise ValidationError(f"line {lineno}: gold_doc_ids must be a list of strings")
    labels = obj.get("labels", {})
    if not isinstance(labels, dict) or not all(isinstance(v, str) for v in labels.values()):
        raise ParseError('field "labels" must be an object of strings', lineno, path)
    return QaRecord(obj["question_id"], obj["question"], obj["gold_answer"], tuple(gold), labels)


def load_qa_dataset(
    lines: Iterable[str], taxonomy: CategoryTaxonomy, path: str | None = None
) -> list[QaRecord]:
    records: list[QaRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = _parse_record(line, lineno, path)
        validate_record(rec, taxonomy)
        if rec.question_id in seen:
            raise IntegrityError(f"duplicate question_id {rec.question_id!r} at line {lineno}")
        seen.add(rec.question_id)
        records.append(rec)
    return records


def read_qa_dataset(path: str | Path, taxonomy: CategoryTaxonomy) -> list[QaRecord]:
    with open(path, encoding="utf-8") as fh:
        return load_qa_dataset(fh, taxonomy, path=str(path))


def dump_qa_dataset(records: Sequence[QaRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)


@dataclass(frozen=True)
class Stratum:
    selector: Mapping[str, str]
    record_ids: tuple[str, ...]

    @property
    def label(self) -> str:
        return ", ".join(self.selector.values())


def stratify(
    records: Sequence[QaRecord], taxonomy: CategoryTaxonomy, dimension: str
) -> list[Stratum]:
    """Partition records by one dimension, or by full label combination.

    Only observed strata are returned, in taxonomy declaration order.
    """
    if dimension == FULL_COMBINATION:
        dims = taxonomy.dimensions
    else:
        dims = (taxonomy[dimension],)
    rank = {d.name: {c: i for i, c in enumerate(d.category_names)} for d in dims}

    groups: dict[tuple[str, ...], list[str]] = {}
    for rec in records:
        key = tuple(rec.labels[d.name] for d in dims)
        groups.setdefault(key, []).append(rec.question_id)

    def order(key):
        return tuple(rank[d.name][c] for d, c in zip(dims, key))

    return [
        Stratum({d.name: c for d, c in zip(dims, key)}, tuple(groups[key]))
        for key in sorted(groups, key=order)
    ]
