"""Per-question scoring and overall / stratified aggregation of a pipeline run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .dataset import FULL_COMBINATION, CategoryTaxonomy, QaRecord, stratify
from .dense import EmbeddingProvider
from .errors import CompletenessError
from .generation import GenerationResult
from .metrics import (
    BLEU_EPSILON,
    bleu,
    retrieval_scores,
    rouge_l,
    rouge_n,
    semantic_similarity,
    to_doc_ranking,
)
from .ranking import RankedList

RETRIEVAL_KEYS = ("map", "mrr", "ndcg_at_10", "recall_at_1", "recall_at_10", "prec_at_1", "prec_at_10")
GENERATION_KEYS = ("rouge1", "rougeL", "bleu", "cosine_sim", "refusal_rate", "rouge1_f1", "rougeL_f1")

METHOD_NOTES = {
    "rouge": "headline ROUGE-1/ROUGE-L values are recall; *_f1 fields carry F1",
    "bleu": f"sentence-level, n<=4 capped at text length, zero counts smoothed to {BLEU_EPSILON}",
    "relevance": "binary, document level; chunks mapped to parents by best rank",
    "precision_at_k": "fixed denominator k",
    "time": "mean_time_seconds = retrieval + generation wall clock per question",
}


@dataclass(frozen=True)
class QuestionTiming:
    retrieval_seconds: float = 0.0
    generation_seconds: float = 0.0

    @property
    def total(self) -> float:
        return self.retrieval_seconds + self.generation_seconds


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class RetrievalMetrics:
    map: float
    mrr: float
    ndcg_at_10: float
    recall_at_1: float
    recall_at_10: float
    prec_at_1: float
    prec_at_10: float
    n: int
    mean_time_seconds: float = 0.0

    @classmethod
    def mean_of(cls, rows: Sequence[dict], times: Sequence[float] = ()) -> "RetrievalMetrics":
        vals = {k: _mean([r[k] for r in rows]) for k in RETRIEVAL_KEYS}
        return cls(**vals, n=len(rows), mean_time_seconds=_mean(times) if times else 0.0)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("mean_time_seconds")
        return d


@dataclass(frozen=True)
class GenerationMetrics:
    rouge1: float
    rougeL: float
    bleu: float
    cosine_sim: float
    refusal_rate: float
    rouge1_f1: float
    rougeL_f1: float
    n: int
    n_failed: int = 0

    @classmethod
    def mean_of(cls, rows: Sequence[dict], n_failed: int = 0) -> "GenerationMetrics":
        vals = {k: _mean([r[k] for r in rows]) for k in GENERATION_KEYS}
        return cls(**vals, n=len(rows), n_failed=n_failed)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QuestionRow:
    question_id: str
    labels: Mapping[str, str]
    retrieval: Mapping[str, float] | None = None
    generation: Mapping[str, float] | None = None
    failed: bool = False
    timing: QuestionTiming = field(default_factory=QuestionTiming)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "question_id": self.question_id,
            "labels": dict(self.labels),
            "retrieval": dict(self.retrieval) if self.retrieval is not None else None,
            "generation": dict(self.generation) if self.generation is not None else None,
            "failed": self.failed,
        }
        if include_timing:
            d["timing"] = asdict(self.timing)
        return d


@dataclass(frozen=True)
class StratumMetrics:
    dimension: str
    selector: Mapping[str, str]
    n: int
    retrieval: RetrievalMetrics | None
    generation: GenerationMetrics | None

    @property
    def label(self) -> str:
        return ", ".join(self.selector.values())


@dataclass(frozen=True)
class EvalReport:
    config_id: str
    retrieval: RetrievalMetrics | None
    generation: GenerationMetrics | None
    strata: tuple[StratumMetrics, ...]
    rows: tuple[QuestionRow, ...]

    def to_dict(self, include_timing: bool = False) -> dict:
        """Machine-readable report. Timing is excluded by default so the file is reproducible."""
        def gen(m):
            return m.to_dict() if m else None

        def ret(m):
            return m.to_dict(include_timing) if m else None

        return {
            "config_id": self.config_id,
            "methods": METHOD_NOTES,
            "overall": {"retrieval": ret(self.retrieval), "generation": gen(self.generation)},
            "strata": [
                {
                    "dimension": s.dimension,
                    "selector": dict(s.selector),
                    "n": s.n,
                    "retrieval": ret(s.retrieval),
                    "generation": gen(s.generation),
                }
                for s in self.strata
            ],
            "questions": [r.to_dict(include_timing) for r in self.rows],
        }

    def timing_dict(self) -> dict:
        ret = [r.timing.retrieval_seconds for r in self.rows]
        gen = [r.timing.generation_seconds for r in self.rows]
        total = [r.timing.total for r in self.rows]
        wall = math.fsum(total)
        return {
            "config_id": self.config_id,
            "n": len(self.rows),
            "mean_retrieval_seconds": _mean(ret) if ret else 0.0,
            "mean_generation_seconds": _mean(gen) if gen else 0.0,
            "mean_time_seconds": _mean(total) if total else 0.0,
            "total_seconds": wall,
            "questions_per_second": len(self.rows) / wall if wall > 0 else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping, timing: Mapping | None = None) -> "EvalReport":
        def ret(d):
            if d is None:
                return None
            d = dict(d)
            d.setdefault("mean_time_seconds", (timing or {}).get("mean_time_seconds", 0.0))
            return RetrievalMetrics(**d)

        def gen(d):
            return GenerationMetrics(**d) if d is not None else None

        rows = tuple(
            QuestionRow(
                r["question_id"], r["labels"], r["retrieval"], r["generation"], r["failed"],
                QuestionTiming(**r["timing"]) if "timing" in r else QuestionTiming(),
            )
            for r in data["questions"]
        )
        strata = tuple(
            StratumMetrics(s["dimension"], s["selector"], s["n"], ret(s["retrieval"]), gen(s["generation"]))
            for s in data["strata"]
        )
        return cls(
            data["config_id"],
            ret(data["overall"]["retrieval"]),
            gen(data["overall"]["generation"]),
            strata,
            rows,
        )


def score_generation(result: GenerationResult, gold_answer: str, provider: EmbeddingProvider) -> dict:
    r1 = rouge_n(result.answer, gold_answer, 1)
    rl = rouge_l(result.answer, gold_answer)
    return {
        "rouge1": r1.recall,
        "rougeL": rl.recall,
        "bleu": bleu(result.answer, gold_answer),
        "cosine_sim": semantic_similarity(result.answer, gold_answer, provider),
        "refusal_rate": 1.0 if result.is_refusal else 0.0,
        "rouge1_f1": r1.f1,
        "rougeL_f1": rl.f1,
    }


def _aggregate(rows: Sequence[QuestionRow]) -> tuple[RetrievalMetrics | None, GenerationMetrics | None]:
    ret_rows = [r for r in rows if r.retrieval is not None]
    retrieval = (
        RetrievalMetrics.mean_of([r.retrieval for r in ret_rows], [r.timing.total for r in ret_rows])
        if ret_rows
        else None
    )
    answered = [r.generation for r in rows if r.generation is not None and not r.failed]
    failed = sum(1 for r in rows if r.failed)
    generation = GenerationMetrics.mean_of(answered, failed) if answered else None
    return retrieval, generation


def evaluate_run(
    records: Sequence[QaRecord],
    rankings: Mapping[str, RankedList] | None,
    generations: Mapping[str, GenerationResult] | None,
    timings: Mapping[str, QuestionTiming] | None,
    taxonomy: CategoryTaxonomy,
    strat_dims: Sequence[str] = (),
    *,
    chunk_parent: Mapping[str, str],
    similarity_provider: EmbeddingProvider | None = None,
    full_combination: bool = False,
    config_id: str = "",
) -> EvalReport:
    """Score every question, then aggregate overall and per stratum.

    Failed generations (``error`` set) are excluded from generation means and
    counted in ``n_failed``.
    """
    if rankings is None and generations is None:
        raise CompletenessError("nothing to evaluate", [r.question_id for r in records])
    for name, mapping in (("rankings", rankings), ("generations", generations)):
        if mapping is not None:
            missing = [r.question_id for r in records if r.question_id not in mapping]
            if missing:
                raise CompletenessError(f"{name} missing for question(s)", missing)
    if generations is not None and similarity_provider is None:
        raise ValueError("similarity_provider is required to score generations")
    timings = timings or {}

    rows: list[QuestionRow] = []
    for rec in records:
        ret = None
        if rankings is not None:
            docs = to_doc_ranking(rankings[rec.question_id], chunk_parent)
            ret = retrieval_scores(docs, set(rec.gold_doc_ids))
        gen, failed = None, False
        if generations is not None:
            result = generations[rec.question_id]
            failed = result.failed
            if not failed:
                gen = score_generation(result, rec.gold_answer, similarity_provider)
        rows.append(
            QuestionRow(rec.question_id, dict(rec.labels), ret, gen, failed,
                        timings.get(rec.question_id, QuestionTiming()))
        )

    by_id = {r.question_id: r for r in rows}
    strata: list[StratumMetrics] = []
    dims = list(strat_dims) + ([FULL_COMBINATION] if full_combination else [])
    for dim in dims:
        for s in stratify(records, taxonomy, dim):
            members = [by_id[q] for q in s.record_ids]
            ret_m, gen_m = _aggregate(members)
            strata.append(StratumMetrics(dim, dict(s.selector), len(members), ret_m, gen_m))

    ret_m, gen_m = _aggregate(rows)
    return EvalReport(config_id, ret_m, gen_m, tuple(strata), tuple(rows))
