import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from prfclf.analysis import analyze
from prfclf.index import (
    CorpusError,
    Document,
    FeatureVector,
    InvertedIndex,
    build_index,
    doc_vector,
    idf,
    read_corpus,
    write_corpus,
)


def plain(text):
    return text.split()


def test_single_doc_counts():
    idx = build_index([Document("d", "a a b")], analyzer=plain)
    assert idx.df["a"] == 1 and idx.df["b"] == 1
    assert idx.tf("a", "d") == 2
    assert idx.doc_length("d") == 3
    assert idx.stats.avgdl == 3


def test_two_doc_counts():
    idx = build_index([Document("x", "a"), Document("y", "a b")], analyzer=plain)
    assert idx.df["a"] == 2 and idx.df["b"] == 1
    assert idx.stats.avgdl == 1.5
    assert idx.stats.n_docs == 2
    assert idx.stats.total_terms == 3


def test_duplicate_docid_is_named():
    with pytest.raises(CorpusError, match="'X'"):
        build_index([Document("X", "a"), Document("X", "b")])


def test_empty_corpus_rejected():
    with pytest.raises(CorpusError):
        build_index([])


def test_all_empty_documents_have_unit_avgdl():
    idx = build_index([Document("a", ""), Document("b", "the")])
    assert idx.stats.avgdl == 1.0


def test_idf_values():
    idx2 = build_index([Document("x", "a"), Document("y", "b")], analyzer=plain)
    assert idf(idx2, "a") == pytest.approx(math.log(2))
    idx1 = build_index([Document("x", "a")], analyzer=plain)
    assert idf(idx1, "a") == pytest.approx(math.log(4 / 3))
    assert idf(idx1, "a") == pytest.approx(0.2877, abs=1e-4)
    idx10 = build_index([Document(str(i), "z") for i in range(10)], analyzer=plain)
    assert idf(idx10, "unseen") == pytest.approx(math.log(22))


def test_single_term_vector_is_one_hot():
    idx = build_index([Document("x", "a a a"), Document("y", "b")], analyzer=plain)
    assert doc_vector(idx, "x").weights == {"a": 1.0}


def test_three_four_five():
    # equal idf for both terms, so tf 3 and 4 give weights in a 3:4 ratio
    idx = build_index(
        [Document("x", "a a a b b b b"), Document("y", "c")], analyzer=plain
    )
    vec = doc_vector(idx, "x").weights
    assert vec["a"] == pytest.approx(0.6)
    assert vec["b"] == pytest.approx(0.8)


def test_empty_document_vector(letters_index):
    vec = doc_vector(letters_index, "d")
    assert vec.weights == {}
    assert vec.norm() == 0.0


def test_unknown_docid(letters_index):
    with pytest.raises(CorpusError):
        doc_vector(letters_index, "nope")


def test_vectors_store_no_zeros(letters_index):
    for d in letters_index.docids:
        assert all(w != 0.0 for w in letters_index.doc_vector(d).weights.values())


def test_index_is_read_only(letters_index):
    with pytest.raises(TypeError):
        letters_index.postings["new"] = ()
    with pytest.raises(TypeError):
        letters_index.doc_lengths["a"] = 1


def test_feature_vector_dot():
    a = FeatureVector({"x": 1.0, "y": 2.0})
    assert a.dot(FeatureVector({"y": 3.0, "z": 5.0})) == 6.0
    assert a.dot({"x": 2.0}) == 2.0


def random_corpus(rng, n_docs, vocab):
    words = [f"t{i}" for i in range(vocab)]
    return [
        Document(f"doc{i:03d}", " ".join(rng.choice(words) for _ in range(rng.randint(0, 30))))
        for i in range(n_docs)
    ]


@pytest.mark.parametrize("seed", range(5))
def test_postings_match_brute_force_recount(seed):
    rng = random.Random(seed)
    docs = random_corpus(rng, rng.randint(1, 100), 25)
    idx = build_index(docs)
    corpus_counts = Counter(t for d in docs for t in analyze(d.text))
    for term, plist in idx.postings.items():
        assert sum(tf for _, tf in plist) == corpus_counts[term]
        assert idx.df[term] == len(plist)
        assert [d for d, _ in plist] == sorted(d for d, _ in plist)
    assert set(idx.postings) == set(corpus_counts)
    for d in docs:
        assert sum(idx.doc_terms(d.docid).values()) == idx.doc_length(d.docid)


@pytest.mark.parametrize("seed", range(5))
def test_vector_norms(seed):
    idx = build_index(random_corpus(random.Random(seed), 60, 30))
    for d in idx.docids:
        n = idx.doc_vector(d).norm()
        if idx.doc_length(d):
            assert abs(n - 1.0) <= 1e-9
        else:
            assert n == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_build_is_order_independent(seed):
    rng = random.Random(seed)
    docs = random_corpus(rng, 20, 12)
    shuffled = docs[:]
    rng.shuffle(shuffled)
    a, b = build_index(docs), build_index(shuffled)
    assert a == b
    assert list(a.postings.items()) == list(b.postings.items())


def test_snapshot_round_trip(tmp_path, three_docs_index):
    path = tmp_path / "idx.bin"
    three_docs_index.save(path)
    assert path.read_bytes().startswith(b"PRFIDX1\n")
    loaded = InvertedIndex.load(path)
    assert loaded == three_docs_index
    assert loaded.stats == three_docs_index.stats
    for d in loaded.docids:
        assert loaded.doc_vector(d) == three_docs_index.doc_vector(d)
    # saving the loaded copy reproduces the same bytes
    path2 = tmp_path / "idx2.bin"
    loaded.save(path2)
    assert path2.read_bytes() == path.read_bytes()


def test_snapshot_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTANIDX")
    with pytest.raises(CorpusError, match="magic"):
        InvertedIndex.load(path)


def test_snapshot_truncated(tmp_path, three_docs_index):
    path = tmp_path / "idx.bin"
    three_docs_index.save(path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(CorpusError):
        InvertedIndex.load(path)


def test_corpus_round_trip(tmp_path):
    docs = [Document("a", "héllo wörld"), Document("b", "")]
    path = tmp_path / "c.jsonl"
    write_corpus(docs, path)
    assert list(read_corpus(path)) == docs


def test_corpus_bad_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "contents": "x"}\n{"id": "b"}\n')
    with pytest.raises(CorpusError, match=":2:"):
        list(read_corpus(path))
