"""Pipeline stages: index, retrieve, generate, evaluate, report.

Each stage reads the artifacts of the previous one from ``output_dir`` so
stages can be re-run independently:

    index/chunks.jsonl, index/sparse.json, index/sparse_doc2query.json, index/dense.{npy,ids.json}
    runs/<preset>/rankings.jsonl, retrieval_timings.jsonl
    runs/<preset>/generations.jsonl, generation_timings.jsonl
    reports/<preset>/report.json, timing.json, report.{md,csv}
    reports/combined.{md,csv,json}
    manifest.json
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from ._io import atomic_write_text, iter_lines, read_json, sha256_file, write_json, write_jsonl
from .config import PipelineConfig
from .corpus import DocumentChunk, chunk_corpus, read_corpus
from .dataset import QaRecord, read_qa_dataset
from .dense import DenseIndex, HashingEmbedder, HttpEmbeddingProvider, build_dense_index, search_dense
from .errors import ConfigError, HybridRagError, MissingArtifactError
from .evaluation import EvalReport, QuestionTiming, evaluate_run
from .generation import (
    EchoClient,
    FixedClient,
    GenerationConfig,
    GenerationResult,
    GoldAnswerClient,
    HttpGenerationClient,
    PromptTemplate,
    build_answer_prompt,
    generate_answer,
    load_template,
)
from .ranking import (
    ConstantScorer,
    FusionConfig,
    HttpPassageScorer,
    OracleScorer,
    RankedList,
    TokenOverlapScorer,
    fuse,
    rerank,
)
from .report import generation_table, render, retrieval_table, strata_table
from .services import JsonEndpoint
from .sparse import (
    Bm25Params,
    HttpQuestionGenerator,
    MockQuestionGenerator,
    SparseIndex,
    augment_doc2query,
    build_sparse_index,
    search_sparse,
)

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Workspace:
    root: Path

    @property
    def index_dir(self) -> Path:
        return self.root / "index"

    @property
    def chunks(self) -> Path:
        return self.index_dir / "chunks.jsonl"

    @property
    def sparse(self) -> Path:
        return self.index_dir / "sparse.json"

    @property
    def sparse_doc2query(self) -> Path:
        return self.index_dir / "sparse_doc2query.json"

    @property
    def dense(self) -> Path:
        return self.index_dir / "dense"

    def run_dir(self, preset: str) -> Path:
        return self.root / "runs" / preset

    def rankings(self, preset: str) -> Path:
        return self.run_dir(preset) / "rankings.jsonl"

    def generations(self, preset: str) -> Path:
        return self.run_dir(preset) / "generations.jsonl"

    def retrieval_timings(self, preset: str) -> Path:
        return self.run_dir(preset) / "retrieval_timings.jsonl"

    def generation_timings(self, preset: str) -> Path:
        return self.run_dir(preset) / "generation_timings.jsonl"

    def report_dir(self, preset: str) -> Path:
        return self.root / "reports" / preset

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"


def _map(fn: Callable[[T], R], items: Sequence[T], parallelism: int) -> list[R]:
    if parallelism > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _nondeterministic(cfg: PipelineConfig) -> list[str]:
    bindings = []
    if cfg.dense.provider == "http":
        bindings.append("dense.provider")
    if cfg.sparse.doc2query and cfg.sparse.question_generator == "http":
        bindings.append("sparse.question_generator")
    if cfg.rerank.scorer == "http":
        bindings.append("rerank.scorer")
    if cfg.generation.client == "http":
        bindings.append("generation.client")
    if cfg.evaluation.similarity_provider == "http":
        bindings.append("evaluation.similarity_provider")
    return bindings


def update_manifest(
    cfg: PipelineConfig, stage: str, artifacts: Sequence[Path], started: str, seconds: float, **extra
) -> None:
    ws = Workspace(cfg.output_path)
    manifest = read_json(ws.manifest) if ws.manifest.exists() else {"stages": {}, "artifacts": {}}
    manifest["stages"][stage] = {
        "config_id": cfg.config_id,
        "config": cfg.to_dict(),
        "started": started,
        "finished": _now(),
        "wall_clock_seconds": seconds,
        "nondeterministic_bindings": _nondeterministic(cfg),
        **extra,
    }
    for path in artifacts:
        manifest["artifacts"][str(path.relative_to(ws.root))] = sha256_file(path)
    write_json(ws.manifest, manifest)


# -- bindings ---------------------------------------------------------------


def make_embedder(cfg: PipelineConfig):
    if cfg.dense.provider == "hashing":
        return HashingEmbedder(cfg.dense.dimension, seed=cfg.seed)
    if cfg.dense.provider == "http":
        return HttpEmbeddingProvider(JsonEndpoint.from_env("EMBEDDING"), cfg.dense.dimension)
    raise ConfigError(f"unknown dense provider {cfg.dense.provider!r}")


def make_similarity_provider(cfg: PipelineConfig):
    ev = cfg.evaluation
    if ev.similarity_provider == "hashing":
        return HashingEmbedder(ev.similarity_dimension, seed=cfg.seed)
    if ev.similarity_provider == "http":
        return HttpEmbeddingProvider(JsonEndpoint.from_env("EMBEDDING"), ev.similarity_dimension)
    raise ConfigError(f"unknown similarity provider {ev.similarity_provider!r}")


def make_question_generator(cfg: PipelineConfig):
    if cfg.sparse.question_generator == "mock":
        return MockQuestionGenerator(seed=cfg.seed)
    if cfg.sparse.question_generator == "http":
        return HttpQuestionGenerator(JsonEndpoint.from_env("GENERATION"))
    raise ConfigError(f"unknown question generator {cfg.sparse.question_generator!r}")


def make_scorer(cfg: PipelineConfig, records: Sequence[QaRecord], chunks: Sequence[DocumentChunk]):
    kind = cfg.rerank.scorer
    if kind == "oracle":
        by_doc: dict[str, set[str]] = {}
        for c in chunks:
            by_doc.setdefault(c.parent_doc_id, set()).add(c.text)
        gold: dict[str, set[str]] = {}
        for rec in records:
            bucket = gold.setdefault(rec.question, set())
            for doc in rec.gold_doc_ids:
                bucket |= by_doc.get(doc, set())
        return OracleScorer({q: frozenset(s) for q, s in gold.items()})
    if kind == "constant":
        return ConstantScorer(cfg.rerank.constant)
    if kind == "overlap":
        return TokenOverlapScorer()
    if kind == "http":
        return HttpPassageScorer(JsonEndpoint.from_env("RERANK"))
    raise ConfigError(f"unknown rerank scorer {kind!r}")


def make_client(cfg: PipelineConfig, records: Sequence[QaRecord]):
    g = cfg.generation
    if g.client == "gold":
        return GoldAnswerClient({r.question: r.gold_answer for r in records})
    if g.client == "echo":
        return EchoClient()
    if g.client == "fixed":
        return FixedClient(g.fixed_text)
    if g.client == "http":
        return HttpGenerationClient(JsonEndpoint.from_env("GENERATION", timeout=g.timeout_seconds))
    raise ConfigError(f"unknown generation client {g.client!r}")


def make_template(cfg: PipelineConfig) -> PromptTemplate:
    g = cfg.generation
    if g.template_path is not None:
        template = load_template(cfg.resolve(g.template_path))
        if template.strategy.value != g.prompt_strategy:
            raise ConfigError(
                f"template {g.template_path} declares strategy {template.strategy.value!r}, "
                f"config asks for {g.prompt_strategy!r}"
            )
        return template
    if g.prompt_strategy != "default":
        raise ConfigError(f"prompt strategy {g.prompt_strategy!r} needs generation.template_path")
    return PromptTemplate()


# -- artifact loaders -------------------------------------------------------


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} not found; run `hybridrag {producer}` first")
    return path


def load_chunks(ws: Workspace) -> list[DocumentChunk]:
    return [DocumentChunk.from_dict(json.loads(ln)) for ln in iter_lines(_require(ws.chunks, "index")) if ln.strip()]


def load_records(cfg: PipelineConfig) -> list[QaRecord]:
    if not cfg.qa_file.is_file():
        raise ConfigError(f"QA dataset not found: {cfg.qa_file}")
    return read_qa_dataset(cfg.qa_file, cfg.load_taxonomy())


def _read_keyed(path: Path) -> dict[str, dict]:
    rows = [json.loads(ln) for ln in iter_lines(path) if ln.strip()]
    return {r["question_id"]: r for r in rows}


def load_rankings(ws: Workspace, preset: str) -> dict[str, RankedList]:
    rows = _read_keyed(_require(ws.rankings(preset), f"retrieve --preset {preset}"))
    return {qid: RankedList.from_list(r["entries"]) for qid, r in rows.items()}


def load_generations(ws: Workspace, preset: str) -> dict[str, GenerationResult]:
    rows = _read_keyed(_require(ws.generations(preset), f"generate --preset {preset}"))
    lat = {}
    if ws.generation_timings(preset).exists():
        lat = {q: r["seconds"] for q, r in _read_keyed(ws.generation_timings(preset)).items()}
    return {qid: GenerationResult.from_dict(r, lat.get(qid, 0.0)) for qid, r in rows.items()}


def load_timings(ws: Workspace, preset: str) -> dict[str, QuestionTiming]:
    ret, gen = {}, {}
    if ws.retrieval_timings(preset).exists():
        ret = {q: r["seconds"] for q, r in _read_keyed(ws.retrieval_timings(preset)).items()}
    if ws.generation_timings(preset).exists():
        gen = {q: r["seconds"] for q, r in _read_keyed(ws.generation_timings(preset)).items()}
    return {q: QuestionTiming(ret.get(q, 0.0), gen.get(q, 0.0)) for q in ret.keys() | gen.keys()}


# -- stages -----------------------------------------------------------------


def cmd_index(cfg: PipelineConfig) -> dict:
    """Chunk the corpus and persist the chunk store, sparse, doc2query and dense indexes."""
    if not cfg.corpus_file.is_file():
        raise ConfigError(f"corpus not found: {cfg.corpus_file}")
    started, t0 = _now(), time.perf_counter()
    ws = Workspace(cfg.output_path)

    docs = read_corpus(cfg.corpus_file)
    chunks = chunk_corpus(docs, cfg.chunking.max_tokens)
    params = Bm25Params(cfg.sparse.k1, cfg.sparse.b)
    sparse = build_sparse_index(chunks, params)
    dense = build_dense_index(chunks, make_embedder(cfg), cfg.dense.passage_prefix, cfg.parallelism)

    write_jsonl(ws.chunks, (c.to_dict() for c in chunks))
    write_json(ws.sparse, sparse.to_dict())
    dense.save(ws.dense)
    artifacts = [ws.chunks, ws.sparse, ws.dense.with_suffix(".npy"), ws.dense.with_suffix(".ids.json")]

    summary = {"documents": len(docs), "chunks": len(chunks), "vocabulary": len(sparse.vocabulary)}
    if cfg.sparse.doc2query:
        gen = make_question_generator(cfg)
        augmented = _map(
            lambda c: augment_doc2query(c, gen, cfg.sparse.n_questions), chunks, cfg.parallelism
        )
        d2q = build_sparse_index(augmented, params)
        write_json(ws.sparse_doc2query, d2q.to_dict())
        artifacts.append(ws.sparse_doc2query)
        summary["doc2query_vocabulary"] = len(d2q.vocabulary)

    corpus_hash = sha256_file(cfg.corpus_file)
    update_manifest(cfg, "index", artifacts, started, time.perf_counter() - t0,
                    corpus_sha256=corpus_hash, **summary)
    log.info("indexed %d documents into %d chunks", len(docs), len(chunks))
    return summary


def _load_sparse(path: Path, producer: str = "index") -> SparseIndex:
    return SparseIndex.from_dict(read_json(_require(path, producer)))


def build_retriever(cfg: PipelineConfig, records: Sequence[QaRecord], scorer=None) -> Callable[[QaRecord], RankedList]:
    """Return a per-question retrieval function for the config's retrieval mode."""
    ws = Workspace(cfg.output_path)
    mode = cfg.retrieval
    fcfg = FusionConfig(cfg.fusion.k_each, cfg.fusion.top_n, cfg.fusion.w_sparse, cfg.fusion.w_dense)

    if mode == "doc2query":
        if not ws.sparse_doc2query.exists():
            raise MissingArtifactError(
                f"{ws.sparse_doc2query} not found; run `hybridrag index` with sparse.doc2query enabled"
            )
        d2q = _load_sparse(ws.sparse_doc2query)
        return lambda rec: search_sparse(d2q, rec.question, cfg.sparse.k)

    sparse = _load_sparse(ws.sparse) if mode != "dense" else None
    dense = embedder = None
    if mode != "sparse":
        _require(ws.dense.with_suffix(".npy"), "index")
        dense = DenseIndex.load(ws.dense)
        embedder = make_embedder(cfg)

    def dense_search(rec: QaRecord, k: int) -> RankedList:
        return search_dense(dense, rec.question, embedder, k, cfg.dense.query_prefix)

    if mode == "sparse":
        return lambda rec: search_sparse(sparse, rec.question, cfg.sparse.k)
    if mode == "dense":
        return lambda rec: dense_search(rec, cfg.dense.k)

    def hybrid(rec: QaRecord, top_n: int | None = None) -> RankedList:
        cfg_n = fcfg if top_n is None else FusionConfig(fcfg.k_each, top_n, fcfg.w_sparse, fcfg.w_dense)
        return fuse(search_sparse(sparse, rec.question, fcfg.k_each), dense_search(rec, fcfg.k_each), cfg_n)

    if mode == "hybrid":
        return hybrid

    chunk_texts = {c.chunk_id: c.text for c in load_chunks(ws)}
    if scorer is None:
        scorer = make_scorer(cfg, records, load_chunks(ws))
    if cfg.rerank.pool not in ("union", "fused"):
        raise ConfigError(f"unknown rerank pool policy {cfg.rerank.pool!r}")
    pool_n = 2 * fcfg.k_each if cfg.rerank.pool == "union" else fcfg.top_n

    def hybrid_rerank(rec: QaRecord) -> RankedList:
        return rerank(hybrid(rec, pool_n), rec.question, scorer, chunk_texts, cfg.rerank.top_n)

    return hybrid_rerank


def cmd_retrieve(cfg: PipelineConfig, scorer=None) -> Path:
    """Retrieve a ranking for every question under the config's preset."""
    records = load_records(cfg)
    ws = Workspace(cfg.output_path)
    started, t0 = _now(), time.perf_counter()
    retrieve = build_retriever(cfg, records, scorer)

    def one(rec: QaRecord):
        start = time.perf_counter()
        ranked = retrieve(rec)
        return ranked, time.perf_counter() - start

    results = _map(one, records, cfg.parallelism)
    write_jsonl(
        ws.rankings(cfg.preset),
        ({"question_id": rec.question_id, "entries": ranked.to_list()} for rec, (ranked, _) in zip(records, results)),
    )
    timing_rows = []
    for rec, (ranked, secs) in zip(records, results):
        row = {"question_id": rec.question_id, "seconds": secs}
        if ranked.latencies:
            row["rerank_candidate_seconds"] = dict(ranked.latencies)
        timing_rows.append(row)
    write_jsonl(ws.retrieval_timings(cfg.preset), timing_rows)
    update_manifest(cfg, f"retrieve:{cfg.preset}", [ws.rankings(cfg.preset)], started,
                    time.perf_counter() - t0, questions=len(records))
    return ws.rankings(cfg.preset)


def cmd_generate(cfg: PipelineConfig, client=None) -> Path:
    """Generate one answer per question from the preset's rankings.

    Client failures are recorded as flagged rows unless ``cfg.fail_fast``.
    """
    records = load_records(cfg)
    ws = Workspace(cfg.output_path)
    rankings = load_rankings(ws, cfg.preset)
    chunks = {c.chunk_id: c for c in load_chunks(ws)}
    template = make_template(cfg)
    client = client or make_client(cfg, records)
    g = cfg.generation
    gcfg = GenerationConfig(g.temperature, g.top_p, g.max_answer_tokens, g.context_size,
                            g.prompt_strategy, g.timeout_seconds)
    started, t0 = _now(), time.perf_counter()

    missing = [r.question_id for r in records if r.question_id not in rankings]
    if missing:
        raise MissingArtifactError(f"rankings missing for question(s): {', '.join(missing)}")

    def one(rec: QaRecord) -> GenerationResult:
        context = [chunks[cid] for cid in rankings[rec.question_id].chunk_ids[: g.context_size]]
        prompt = build_answer_prompt(context, rec.question, template)
        ids = [c.chunk_id for c in context]
        start = time.perf_counter()
        try:
            return generate_answer(client, prompt, gcfg, g.refusal_phrases, ids)
        except HybridRagError as exc:
            if cfg.fail_fast:
                raise
            log.warning("generation failed for %s: %s", rec.question_id, exc)
            return GenerationResult("", False, time.perf_counter() - start, tuple(ids), error=str(exc))

    results = _map(one, records, cfg.parallelism)
    write_jsonl(
        ws.generations(cfg.preset),
        ({"question_id": rec.question_id, **res.to_dict()} for rec, res in zip(records, results)),
    )
    write_jsonl(
        ws.generation_timings(cfg.preset),
        ({"question_id": rec.question_id, "seconds": res.latency_seconds} for rec, res in zip(records, results)),
    )
    update_manifest(cfg, f"generate:{cfg.preset}", [ws.generations(cfg.preset)], started,
                    time.perf_counter() - t0, questions=len(records),
                    failed=sum(r.failed for r in results), client=getattr(client, "identity", "?"))
    return ws.generations(cfg.preset)


def cmd_evaluate(cfg: PipelineConfig, fmt: str = "md") -> EvalReport:
    """Score the preset's rankings (and generations, when present) and write its report files."""
    records = load_records(cfg)
    ws = Workspace(cfg.output_path)
    started, t0 = _now(), time.perf_counter()
    rankings = load_rankings(ws, cfg.preset)
    generations = load_generations(ws, cfg.preset) if ws.generations(cfg.preset).exists() else None
    chunk_parent = {c.chunk_id: c.parent_doc_id for c in load_chunks(ws)}

    report = evaluate_run(
        records,
        rankings,
        generations,
        load_timings(ws, cfg.preset),
        cfg.load_taxonomy(),
        cfg.evaluation.strat_dims,
        chunk_parent=chunk_parent,
        similarity_provider=make_similarity_provider(cfg),
        full_combination=cfg.evaluation.full_combination,
        config_id=cfg.config_id,
    )
    out = ws.report_dir(cfg.preset)
    write_json(out / "report.json", report.to_dict())
    write_json(out / "timing.json", report.timing_dict())
    artifacts = [out / "report.json"]
    if fmt != "json":
        tables = [
            retrieval_table([(cfg.preset, report)], {cfg.preset: report.timing_dict()}),
            generation_table([(cfg.preset, report)]),
            strata_table(report),
        ]
        atomic_write_text(out / f"report.{fmt}", render(tables, fmt))
        artifacts.append(out / f"report.{fmt}")
    update_manifest(cfg, f"evaluate:{cfg.preset}", artifacts, started, time.perf_counter() - t0)
    return report


def load_report(cfg: PipelineConfig, preset: str) -> EvalReport:
    out = Workspace(cfg.output_path).report_dir(preset)
    data = read_json(_require(out / "report.json", f"evaluate --preset {preset}"))
    timing = read_json(out / "timing.json") if (out / "timing.json").exists() else None
    return EvalReport.from_dict(data, timing)


def cmd_report(cfg: PipelineConfig, presets: Sequence[str], fmt: str = "md") -> Path:
    """Write one combined table with a row per preset."""
    ws = Workspace(cfg.output_path)
    reports = [(p, load_report(cfg, p)) for p in presets]
    timings = {}
    for p, _ in reports:
        t = ws.report_dir(p) / "timing.json"
        if t.exists():
            timings[p] = read_json(t)
    target = ws.root / "reports" / f"combined.{fmt}"
    if fmt == "json":
        write_json(target, {p: {"config_id": r.config_id, **r.to_dict()["overall"]} for p, r in reports})
    else:
        atomic_write_text(target, render([retrieval_table(reports, timings), generation_table(reports)], fmt))
    return target


def run_all(cfg: PipelineConfig, presets: Sequence[str], fmt: str = "md") -> Path:
    """index, then retrieve / generate / evaluate for each preset, then the combined report."""
    cmd_index(cfg)
    for name in presets:
        pcfg = cfg.with_preset(name)
        cmd_retrieve(pcfg)
        cmd_generate(pcfg)
        cmd_evaluate(pcfg, fmt)
    return cmd_report(cfg, presets, fmt)
