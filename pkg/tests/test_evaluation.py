import math

import pytest
from hypothesis import given, settings, strategies as st

from hybridrag.dataset import FULL_COMBINATION, QaRecord, default_taxonomy
from hybridrag.dense import HashingEmbedder
from hybridrag.errors import CompletenessError
from hybridrag.evaluation import EvalReport, QuestionTiming, evaluate_run
from hybridrag.generation import GenerationResult
from hybridrag.ranking import Entry, Provenance, RankedList

TAX = default_taxonomy()
EMB = HashingEmbedder(128)


def labels(fact="factoid", phr="short-search"):
    return {"factuality": fact, "premise": "direct", "phrasing": phr,
            "linguistic-variation": "similar", "user-expertise": "expert"}


def ranked(ids):
    return RankedList(tuple(Entry(c, float(len(ids) - i), Provenance.FUSED) for i, c in enumerate(ids)))


PARENT = {f"d{i}#0": f"d{i}" for i in range(10)}


def test_perfect_single_question():
    rec = QaRecord("q", "Q", "paris is the capital", ("d1",), labels())
    rep = evaluate_run(
        [rec], {"q": ranked(["d1#0", "d2#0"])},
        {"q": GenerationResult("paris is the capital", False, 0.0)}, None, TAX,
        chunk_parent=PARENT, similarity_provider=EMB,
    )
    r, g = rep.retrieval, rep.generation
    assert (r.map, r.mrr, r.ndcg_at_10, r.recall_at_1, r.prec_at_1) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert r.prec_at_10 == 0.1
    assert g.rouge1 == g.rougeL == 1.0
    assert g.bleu == pytest.approx(1.0) and g.cosine_sim == pytest.approx(1.0)
    assert g.refusal_rate == 0.0


def test_stratum_means_by_hand():
    recs = [
        QaRecord("a", "Q", "x", ("d1",), labels("factoid")),
        QaRecord("b", "Q", "x", ("d1",), labels("factoid")),
        QaRecord("c", "Q", "x", ("d1",), labels("open-ended")),
        QaRecord("d", "Q", "x", ("d1",), labels("open-ended")),
    ]
    # reciprocal ranks 1, 1/2, 1/3, 0
    rankings = {
        "a": ranked(["d1#0"]),
        "b": ranked(["d2#0", "d1#0"]),
        "c": ranked(["d2#0", "d3#0", "d1#0"]),
        "d": ranked(["d2#0"]),
    }
    rep = evaluate_run(recs, rankings, None, None, TAX, ["factuality"], chunk_parent=PARENT)
    by = {s.selector["factuality"]: s for s in rep.strata}
    assert by["factoid"].retrieval.mrr == pytest.approx(0.75)
    assert by["open-ended"].retrieval.mrr == pytest.approx(1 / 6)
    assert rep.retrieval.mrr == pytest.approx((1 + 0.5 + 1 / 3) / 4)
    assert rep.generation is None


def test_missing_question_raises():
    recs = [QaRecord("a", "Q", "x", ("d1",), labels()), QaRecord("b", "Q", "x", ("d1",), labels())]
    with pytest.raises(CompletenessError) as err:
        evaluate_run(recs, {"a": ranked(["d1#0"])}, None, None, TAX, chunk_parent=PARENT)
    assert err.value.missing == ["b"]


def test_failed_rows_excluded():
    recs = [QaRecord("a", "Q", "x y", ("d1",), labels()), QaRecord("b", "Q", "x y", ("d1",), labels())]
    gens = {"a": GenerationResult("x y", False, 0.0), "b": GenerationResult("", False, 0.0, error="boom")}
    rep = evaluate_run(recs, None, gens, None, TAX, chunk_parent=PARENT, similarity_provider=EMB)
    assert rep.generation.n == 1 and rep.generation.n_failed == 1
    assert rep.generation.rouge1 == 1.0


def test_report_round_trip_and_timing_split():
    recs = [QaRecord("a", "Q", "x", ("d1",), labels())]
    rep = evaluate_run(recs, {"a": ranked(["d1#0"])}, None, {"a": QuestionTiming(0.5, 1.5)}, TAX,
                       ["phrasing"], chunk_parent=PARENT, full_combination=True, config_id="cfg")
    assert "mean_time_seconds" not in rep.to_dict()["overall"]["retrieval"]
    assert rep.timing_dict()["mean_time_seconds"] == 2.0
    again = EvalReport.from_dict(rep.to_dict(), rep.timing_dict())
    assert again.to_dict() == rep.to_dict()
    assert again.retrieval.mean_time_seconds == 2.0
    assert [s.dimension for s in rep.strata] == ["phrasing", FULL_COMBINATION]


phrasings = TAX["phrasing"].category_names


@settings(max_examples=40)
@given(st.lists(st.tuples(st.sampled_from(phrasings), st.integers(0, 3)), min_size=1, max_size=20))
def test_strata_recombine_to_overall(cases):
    recs, rankings = [], {}
    for i, (phr, pos) in enumerate(cases):
        qid = f"q{i}"
        recs.append(QaRecord(qid, "Q", "x", ("d1",), labels(phr=phr)))
        rankings[qid] = ranked([f"d{j}#0" for j in (2, 3, 4)][:pos] + ["d1#0"])
    rep = evaluate_run(recs, rankings, None, None, TAX, ["phrasing"], chunk_parent=PARENT)
    strata = [s for s in rep.strata if s.dimension == "phrasing"]
    assert sum(s.n for s in strata) == len(recs)
    weighted = math.fsum(s.n * s.retrieval.map for s in strata) / len(recs)
    assert weighted == pytest.approx(rep.retrieval.map, abs=1e-12)
