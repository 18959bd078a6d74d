import pytest
from hypothesis import given, settings, strategies as st

from hybridrag.corpus import (
    Document,
    chunk_corpus,
    chunk_document,
    ingest_corpus,
    split_sentences,
    tokenize,
)
from hybridrag.errors import IntegrityError, ParseError


@pytest.mark.parametrize(
    "text, expected",
    [
        ("", []),
        ("The cat sat.", ["the", "cat", "sat"]),
        ("E5-base,  v2!", ["e5-base", "v2"]),
        ("«Quoted» ... (x)", ["quoted", "x"]),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text) == expected


@pytest.mark.parametrize(
    "text, expected",
    [
        ("A. B? C!", ["A.", "B?", "C!"]),
        ("no terminal punctuation", ["no terminal punctuation"]),
        ("", []),
        ("   ", []),
        ("Version 2.5 is out. Get it", ["Version 2.5 is out.", "Get it"]),
        ("Wait?! Yes.\nNext line.", ["Wait?!", "Yes.", "Next line."]),
    ],
)
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


def _sentence(n_tokens, tag):
    return " ".join(f"{tag}{i}" for i in range(n_tokens - 1)) + f" end{tag}."


def test_chunk_empty_document():
    assert chunk_document(Document("d", "")) == []


def test_three_small_sentences_pack_into_one_chunk():
    text = " ".join(_sentence(100, t) for t in "abc")
    chunks = chunk_document(Document("d", text), 512)
    assert [c.token_count for c in chunks] == [300]
    assert chunks[0].chunk_id == "d#0"


def test_greedy_packing_boundary():
    text = " ".join([_sentence(300, "a"), _sentence(300, "b"), _sentence(100, "c")])
    chunks = chunk_document(Document("d", text), 512)
    assert [c.token_count for c in chunks] == [300, 400]
    assert [c.ordinal for c in chunks] == [0, 1]
    assert [c.chunk_id for c in chunks] == ["d#0", "d#1"]


def test_oversized_sentence_kept_whole():
    text = _sentence(20, "a") + " " + _sentence(3, "b")
    chunks = chunk_document(Document("d", text), 5)
    assert [c.token_count for c in chunks] == [20, 3]
    assert chunks[0].text == _sentence(20, "a")


def test_max_tokens_must_be_positive():
    with pytest.raises(ValueError):
        chunk_document(Document("d", "x."), 0)


sentences = st.lists(
    st.text(alphabet=st.sampled_from("ab cd.!?,\n"), min_size=0, max_size=40), max_size=8
).map(lambda parts: " ".join(parts))


@settings(max_examples=300)
@given(text=sentences, max_tokens=st.integers(1, 12))
def test_chunking_preserves_sentences(text, max_tokens):
    doc = Document("doc", text)
    chunks = chunk_document(doc, max_tokens)
    original = split_sentences(text)
    rebuilt = [s for c in chunks for s in split_sentences(c.text)]
    assert rebuilt == original
    assert [c.ordinal for c in chunks] == list(range(len(chunks)))
    for c in chunks:
        assert c.token_count == len(tokenize(c.text))
        if len(split_sentences(c.text)) >= 2:
            assert c.token_count <= max_tokens
    assert chunk_document(doc, max_tokens) == chunks


def test_chunk_ids_unique_across_corpus():
    docs = [Document(f"d{i}", "One. Two. Three. " * 5) for i in range(4)]
    chunks = chunk_corpus(docs, 2)
    ids = [c.chunk_id for c in chunks]
    assert len(ids) == len(set(ids))


def test_ingest_two_lines():
    docs = ingest_corpus(['{"doc_id": "a", "text": "x"}\n', '{"doc_id": "b", "text": "y", "metadata": {"u": "v"}}\n'])
    assert [d.doc_id for d in docs] == ["a", "b"]
    assert docs[1].metadata == {"u": "v"}


def test_ingest_missing_text_reports_line():
    with pytest.raises(ParseError) as err:
        ingest_corpus(['{"doc_id": "a", "text": "x"}', '{"doc_id": "b"}'])
    assert err.value.line == 2
    assert "text" in str(err.value)


def test_ingest_bad_json_reports_line():
    with pytest.raises(ParseError) as err:
        ingest_corpus(["", "{not json"])
    assert err.value.line == 2


def test_ingest_duplicate_doc_id():
    with pytest.raises(IntegrityError):
        ingest_corpus(['{"doc_id": "a", "text": "x"}', '{"doc_id": "a", "text": "y"}'])
