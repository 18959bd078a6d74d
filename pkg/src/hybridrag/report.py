"""Human-readable tables: retrieval, generation, and stratified breakdowns."""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from .evaluation import EvalReport

RETRIEVAL_COLUMNS = (
    ("MAP", "map"),
    ("Recip. Rank", "mrr"),
    ("nDCG@10", "ndcg_at_10"),
    ("Recall@1", "recall_at_1"),
    ("Recall@10", "recall_at_10"),
    ("Prec@1", "prec_at_1"),
    ("Prec@10", "prec_at_10"),
)
GENERATION_COLUMNS = (
    ("ROUGE-1 (R)", "rouge1"),
    ("ROUGE-L (R)", "rougeL"),
    ("BLEU", "bleu"),
    ("Cos. Sim.", "cosine_sim"),
)


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{x:.3f}"


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.2f}%"


Table = tuple[str, list[str], list[list[str]]]


def retrieval_table(reports: Sequence[tuple[str, EvalReport]], timings: Mapping[str, dict] | None = None) -> Table:
    header = ["Name"] + [h for h, _ in RETRIEVAL_COLUMNS] + ["Time (s)"]
    rows = []
    for name, rep in reports:
        m = rep.retrieval
        t = (timings or {}).get(name)
        time_cell = f"{t['mean_time_seconds']:.3f}" if t else "-"
        cells = [_fmt(getattr(m, k) if m else None) for _, k in RETRIEVAL_COLUMNS]
        rows.append([name] + cells + [time_cell])
    return "Retrieval", header, rows


def generation_table(reports: Sequence[tuple[str, EvalReport]]) -> Table:
    header = ["Name"] + [h for h, _ in GENERATION_COLUMNS] + ["% Refusal"]
    rows = []
    for name, rep in reports:
        m = rep.generation
        cells = [_fmt(getattr(m, k) if m else None) for _, k in GENERATION_COLUMNS]
        rows.append([name] + cells + [_pct(m.refusal_rate if m else None)])
    return "Generation", header, rows


def strata_table(report: EvalReport) -> Table:
    header = ["Name (n)"] + [h for h, _ in GENERATION_COLUMNS] + ["% Refusal", "MAP", "nDCG@10"]
    rows = []
    current = None
    for s in report.strata:
        if s.dimension != current:
            current = s.dimension
            rows.append([f"**{current}**"] + [""] * (len(header) - 1))
        g, r = s.generation, s.retrieval
        rows.append(
            [f"{s.label} ({s.n})"]
            + [_fmt(getattr(g, k) if g else None) for _, k in GENERATION_COLUMNS]
            + [_pct(g.refusal_rate if g else None), _fmt(r.map if r else None), _fmt(r.ndcg_at_10 if r else None)]
        )
    return "Stratified", header, rows


def render_markdown(tables: Sequence[Table]) -> str:
    out = []
    for title, header, rows in tables:
        out.append(f"## {title}\n")
        out.append("| " + " | ".join(header) + " |")
        out.append("|" + "|".join("---" for _ in header) + "|")
        out.extend("| " + " | ".join(r) + " |" for r in rows)
        out.append("")
    return "\n".join(out)


def render_csv(tables: Sequence[Table]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for title, header, rows in tables:
        writer.writerow(["table"] + header)
        for r in rows:
            writer.writerow([title] + [c.strip("*") for c in r])
    return buf.getvalue()


def render(tables: Sequence[Table], fmt: str) -> str:
    if fmt == "md":
        return render_markdown(tables)
    if fmt == "csv":
        return render_csv(tables)
    raise ValueError(f"unknown table format {fmt!r}")
