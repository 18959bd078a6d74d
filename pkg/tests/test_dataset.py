import json
import math

import pytest
from hypothesis import given, strategies as st

from hybridrag.dataset import (
    FULL_COMBINATION,
    CategoryTaxonomy,
    Dimension,
    QaRecord,
    combination_count,
    default_taxonomy,
    dump_qa_dataset,
    load_qa_dataset,
    load_taxonomy,
    stratify,
)
from hybridrag.errors import ChunkLookupError, IntegrityError, ValidationError

TAX = default_taxonomy()
FULL_LABELS = {
    "factuality": "factoid",
    "premise": "direct",
    "phrasing": "short-search",
    "linguistic-variation": "similar",
    "user-expertise": "expert",
}


def line(qid="q1", labels=None, gold=("d1",)):
    return json.dumps(
        {"question_id": qid, "question": "Q?", "gold_answer": "A", "gold_doc_ids": list(gold),
         "labels": labels if labels is not None else FULL_LABELS}
    )


def test_default_taxonomy_values():
    phr = TAX["phrasing"]
    assert len(phr.categories) == 4 and all(p == 0.25 for _, p in phr.categories)
    assert dict(TAX["user-expertise"].categories) == {"expert": 0.8, "novice": 0.2}
    assert dict(TAX["factuality"].categories) == {"factoid": 0.5, "open-ended": 0.5}
    for d in TAX.dimensions:
        assert math.fsum(p for _, p in d.categories) == pytest.approx(1.0, abs=1e-9)


def test_combination_count():
    assert combination_count(TAX) == 64
    assert combination_count(CategoryTaxonomy((Dimension("x", (("a", 0.2), ("b", 0.3), ("c", 0.5))),))) == 3
    assert combination_count(CategoryTaxonomy()) == 1


def test_taxonomy_validation():
    with pytest.raises(ValidationError):
        CategoryTaxonomy((Dimension("x", (("a", 0.6), ("b", 0.6))),))
    with pytest.raises(ValidationError):
        CategoryTaxonomy((Dimension("x", (("a", 0.5), ("a", 0.5))),))


def test_taxonomy_file_round_trip(tmp_path):
    import yaml

    p = tmp_path / "tax.yaml"
    p.write_text(yaml.safe_dump({"taxonomy": TAX.to_dict()}))
    assert load_taxonomy(p) == TAX


def test_load_well_formed():
    recs = load_qa_dataset([line()], TAX)
    assert recs[0].gold_doc_ids == ("d1",)


def test_unknown_category():
    with pytest.raises(ValidationError, match="factuality"):
        load_qa_dataset([line(labels={**FULL_LABELS, "factuality": "speculative"})], TAX)


def test_empty_gold():
    with pytest.raises(ValidationError):
        load_qa_dataset([line(gold=())], TAX)


def test_missing_label_and_duplicates():
    labels = dict(FULL_LABELS)
    labels.pop("premise")
    with pytest.raises(ValidationError, match="premise"):
        load_qa_dataset([line(labels=labels)], TAX)
    with pytest.raises(IntegrityError):
        load_qa_dataset([line("a"), line("a")], TAX)


def records_from(combos):
    return [
        QaRecord(f"q{i}", "Q", "A", ("d",), dict(zip(TAX.dimension_names, combo)))
        for i, combo in enumerate(combos)
    ]


combo = st.tuples(*[st.sampled_from(d.category_names) for d in TAX.dimensions])


@given(st.lists(combo, max_size=40), st.sampled_from(list(TAX.dimension_names) + [FULL_COMBINATION]))
def test_stratify_is_partition(combos, dim):
    recs = records_from(combos)
    strata = stratify(recs, TAX, dim)
    ids = [i for s in strata for i in s.record_ids]
    assert sorted(ids) == sorted(r.question_id for r in recs)
    by_id = {r.question_id: r for r in recs}
    for s in strata:
        for qid in s.record_ids:
            assert all(by_id[qid].labels[k] == v for k, v in s.selector.items())


def test_stratify_factuality_sizes():
    recs = records_from([("factoid", "direct", "short-search", "similar", "expert")] * 96
                        + [("open-ended", "direct", "short-search", "similar", "expert")] * 104)
    strata = stratify(recs, TAX, "factuality")
    assert [(s.selector["factuality"], len(s.record_ids)) for s in strata] == [("factoid", 96), ("open-ended", 104)]


def test_stratify_empty_and_unknown():
    assert stratify([], TAX, "premise") == []
    with pytest.raises(ChunkLookupError):
        stratify([], TAX, "mood")


def test_full_combination_seven_combos():
    base = ["factoid", "direct", "short-search", "similar", "expert"]
    combos = []
    for i, phr in enumerate(["concise-natural", "verbose-natural", "short-search", "long-search"]):
        combos += [tuple(base[:2] + [phr] + base[3:])] * (i + 1)
    combos += [("open-ended", "with-premise", "short-search", "distant", "novice")] * 2
    combos += [("open-ended", "direct", "short-search", "distant", "novice")]
    combos += [("factoid", "direct", "short-search", "similar", "novice")] * 3
    recs = records_from(combos)
    strata = stratify(recs, TAX, FULL_COMBINATION)
    assert len(strata) == 7
    assert sum(len(s.record_ids) for s in strata) == len(recs)


@given(st.lists(combo, min_size=1, max_size=10, unique=True))
def test_dataset_round_trip(combos):
    recs = records_from(combos)
    again = load_qa_dataset(dump_qa_dataset(recs).splitlines(), TAX)
    assert again == recs
    for r in again:
        assert r.combination(TAX) in {
            tuple(c) for c in __import__("itertools").product(*[d.category_names for d in TAX.dimensions])
        }
