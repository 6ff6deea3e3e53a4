import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_difference, reference_logreg, reference_svm
from prfclf.classify import (
    LR,
    SVM,
    LinearModel,
    PseudoLabelConfig,
    TrainingError,
    TrainingSet,
    build_training_set,
    classifier_scores,
    ensemble_scores,
    logreg_objective,
    score_documents,
    select_pseudo_labels,
    svm_objective,
    train_logreg,
    train_svm,
)
from prfclf.index import CorpusError, Document, FeatureVector, build_index
from prfclf.retrieval import RankedList


def fv(*values):
    return FeatureVector({f"f{i}": float(v) for i, v in enumerate(values) if v != 0})


def dense_ts(X, y):
    X = np.asarray(X, dtype=float)
    return TrainingSet(
        tuple(f"d{i}" for i in range(len(y))),
        tuple(fv(*row) for row in X),
        tuple(int(v) for v in y),
    )


def model_vector(model, d):
    return np.array([model.weights.get(f"f{i}", 0.0) for i in range(d)])


def run_of(n):
    return RankedList.from_scores("q", [(f"d{i:04d}", float(n - i)) for i in range(n)])


# -- pseudo labels -----------------------------------------------------------

def test_labels_from_1000_hits():
    run = run_of(1000)
    pos, neg = select_pseudo_labels(run, PseudoLabelConfig(10, 100))
    assert pos == run.docids[:10]
    assert neg == run.docids[900:]


def test_negatives_clipped():
    run = run_of(105)
    pos, neg = select_pseudo_labels(run, PseudoLabelConfig(10, 100))
    assert len(neg) == 95
    assert neg == run.docids[10:]
    assert not set(pos) & set(neg)


def test_no_room_for_negatives():
    with pytest.raises(TrainingError):
        select_pseudo_labels(run_of(10), PseudoLabelConfig(10, 100))


def test_config_validated():
    with pytest.raises(TrainingError):
        PseudoLabelConfig(0, 100)


@pytest.fixture
def corpus_index():
    docs = [Document(f"d{i:04d}", f"common word{i % 7} extra{i % 3}") for i in range(200)]
    return build_index(docs)


def test_training_set_two_rows(corpus_index):
    ts = build_training_set(corpus_index, ["d0000"], ["d0001"])
    assert len(ts) == 2
    assert ts.labels == (1, -1)
    assert ts.docids == ("d0000", "d0001")


def test_training_set_110_rows(corpus_index):
    run = RankedList.from_scores("q", [(d, 1.0 / (i + 1)) for i, d in
                                       enumerate(corpus_index.docids)])
    pos, neg = select_pseudo_labels(run, PseudoLabelConfig(10, 100))
    ts = build_training_set(corpus_index, pos, neg)
    assert len(ts) == 110
    assert ts.labels.count(1) == 10


def test_training_set_overlap(corpus_index):
    with pytest.raises(TrainingError):
        build_training_set(corpus_index, ["d0000", "d0001"], ["d0001"])


def test_training_set_unknown_doc(corpus_index):
    with pytest.raises(CorpusError):
        build_training_set(corpus_index, ["nope"], ["d0001"])


# -- logistic regression ------------------------------------------------------

def test_logreg_symmetric_pair():
    model = train_logreg(dense_ts([[1, 0], [-1, 0]], [1, -1]))
    assert abs(model.bias) < 1e-4
    assert model.weights["f0"] > 0
    assert abs(model.weights.get("f1", 0.0)) < 1e-12
    p_pos, p_neg = score_documents(model, [fv(1, 0), fv(-1, 0)])
    assert p_pos > 0.5 > p_neg


def test_logreg_orthogonal_pair_matches_reference():
    X, y = np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0])
    model = train_logreg(dense_ts(X, y))
    p_pos, p_neg = score_documents(model, [fv(1, 0), fv(0, 1)])
    assert p_pos > 0.5 > p_neg
    ref_val, ref_w, ref_b = reference_logreg(X, y, 1.0)
    val, _, _ = logreg_objective(model_vector(model, 2), model.bias, X, y, 1.0)
    assert abs(val - ref_val) <= 1e-6
    np.testing.assert_allclose(model_vector(model, 2), ref_w, atol=1e-5)


def test_logreg_single_class():
    with pytest.raises(TrainingError):
        train_logreg(dense_ts([[1, 0], [0, 1]], [1, 1]))


# -- SVM ------------------------------------------------------------------------

def test_svm_canonical_max_margin():
    model = train_svm(dense_ts([[1, 0], [-1, 0]], [1, -1]))
    assert model.weights["f0"] == pytest.approx(1.0, abs=1e-9)
    assert abs(model.weights.get("f1", 0.0)) < 1e-12
    assert model.bias == pytest.approx(0.0, abs=1e-9)
    assert score_documents(model, [fv(1, 0), fv(-1, 0)]) == pytest.approx([1.0, -1.0])


def test_svm_duplicated_rows_with_half_c():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 4))
    y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
    y[:2] = [1, -1]
    one = train_svm(dense_ts(X, y), c=1.0)
    two = train_svm(dense_ts(np.vstack([X, X]), np.concatenate([y, y])), c=0.5)
    a, b = model_vector(one, 4), model_vector(two, 4)
    assert a @ b / (np.linalg.norm(a) * np.linalg.norm(b)) == pytest.approx(1.0, abs=1e-6)
    ref_one, _, _ = reference_svm(X, y, 1.0)
    ref_two, _, _ = reference_svm(np.vstack([X, X]), np.concatenate([y, y]), 0.5)
    assert ref_one == pytest.approx(ref_two, abs=1e-6)


def test_svm_single_class():
    with pytest.raises(TrainingError):
        train_svm(dense_ts([[1, 0], [0, 1]], [-1, -1]))


# -- scoring and ensembles ------------------------------------------------------

def test_score_values():
    lr = LinearModel(LR, {"f0": 1.0}, 0.0)
    svm = LinearModel(SVM, {"f0": 1.0}, 0.0)
    assert score_documents(lr, [fv(1, 0)]) == pytest.approx([1 / (1 + math.e ** -1)])
    assert score_documents(lr, [fv(1, 0)])[0] == pytest.approx(0.7311, abs=1e-4)
    assert score_documents(svm, [fv(1, 0)]) == [1.0]
    assert score_documents(lr, [FeatureVector({})]) == [0.5]
    assert score_documents(LinearModel(SVM, {"f0": 1.0}, -0.25), [FeatureVector({})]) == [-0.25]


def test_unseen_terms_contribute_nothing():
    model = LinearModel(SVM, {"f0": 2.0}, 0.5)
    assert score_documents(model, [FeatureVector({"other": 1.0})]) == [0.5]


@settings(max_examples=100)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_lr_score_monotone(a, b):
    lr = LinearModel(LR, {"f0": 1.0}, 0.0)
    sa, sb = score_documents(lr, [fv(a), fv(b)])
    if a < b:
        assert sa <= sb
        if b - a > 1e-6 and abs(a) < 30 and abs(b) < 30:
            assert sa < sb


def test_ensemble_examples():
    assert ensemble_scores([0, 1], [0, 1]) == [0, 1]
    assert ensemble_scores([0, 1], [1, 0]) == [0.5, 0.5]
    assert ensemble_scores([0.2, 0.4, 0.6], [-2, 0, 6]) == pytest.approx([0, 0.375, 1])


def test_ensemble_length_mismatch():
    with pytest.raises(ValueError):
        ensemble_scores([0, 1], [1])


def test_model_dump_round_trip():
    model = LinearModel(LR, {"b": -0.5, "a": 0.25}, 0.125)
    line = model.dump("301")
    assert line == "301 lr 0.125 2 a:0.25 b:-0.5"
    qid, back = LinearModel.parse(line)
    assert qid == "301" and back == model


# -- optimizer properties -------------------------------------------------------

def random_problem(seed, max_rows=20, max_features=10):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, max_rows + 1))
    d = int(rng.integers(1, max_features + 1))
    X = rng.normal(size=(m, d))
    X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    y = np.where(rng.random(m) < 0.4, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


@pytest.mark.parametrize("seed", range(6))
def test_objective_not_worse_than_zero_model(seed):
    X, y = random_problem(seed)
    ts = dense_ts(X, y)
    d = X.shape[1]
    for train, objective in ((train_logreg, logreg_objective), (train_svm, svm_objective)):
        model = train(ts)
        val = objective(model_vector(model, d), model.bias, X, y, 1.0)[0]
        zero = objective(np.zeros(d), 0.0, X, y, 1.0)[0]
        assert val <= zero


@pytest.mark.parametrize("seed", range(6))
def test_gradients_match_finite_differences(seed):
    X, y = random_problem(seed)
    rng = np.random.default_rng(100 + seed)
    d = X.shape[1]
    for objective in (logreg_objective, svm_objective):
        theta = rng.normal(size=d + 1)
        _, gw, gb = objective(theta[:d], theta[d], X, y, 1.3)
        analytic = np.append(gw, gb)
        numeric = central_difference(lambda t: objective(t[:d], t[d], X, y, 1.3)[0], theta)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("seed", range(4))
def test_training_is_bit_deterministic(seed):
    X, y = random_problem(seed)
    ts = dense_ts(X, y)
    assert train_logreg(ts) == train_logreg(ts)
    assert train_svm(ts) == train_svm(ts)


@pytest.mark.parametrize("seed", range(8))
def test_separable_data_fit_exactly(seed):
    rng = np.random.default_rng(seed)
    d = 6
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    rows, labels = [], []
    while len(rows) < 16:
        x = rng.normal(size=d)
        x /= np.linalg.norm(x)
        margin = x @ direction
        if abs(margin) > 0.5:
            rows.append(x)
            labels.append(1 if margin > 0 else -1)
    if len(set(labels)) < 2:
        pytest.skip("draw produced one class")
    X, y = np.array(rows), np.array(labels, dtype=float)
    ts = dense_ts(X, y)
    for c in (1.0, 10.0):
        lr = train_logreg(ts, c)
        svm = train_svm(ts, c)
        probs = np.array(score_documents(lr, ts.vectors))
        margins = np.array(score_documents(svm, ts.vectors))
        assert np.all((probs > 0.5) == (y > 0))
        assert np.all((margins > 0) == (y > 0))


@pytest.mark.parametrize("seed", range(5))
def test_optimizers_reach_reference_optimum(seed):
    X, y = random_problem(seed)
    ts = dense_ts(X, y)
    d = X.shape[1]
    lr = train_logreg(ts)
    svm = train_svm(ts)
    ref_lr, _, _ = reference_logreg(X, y, 1.0)
    ref_svm, _, _ = reference_svm(X, y, 1.0)
    assert abs(logreg_objective(model_vector(lr, d), lr.bias, X, y, 1.0)[0] - ref_lr) <= 1e-6
    assert abs(svm_objective(model_vector(svm, d), svm.bias, X, y, 1.0)[0] - ref_svm) <= 1e-6


def test_no_convergence_warning_on_typical_problem():
    X, y = random_problem(11)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        train_logreg(dense_ts(X, y))
        train_svm(dense_ts(X, y))


# -- sparse fast path -------------------------------------------------------------

@pytest.mark.parametrize("kind", ["lr", "svm", "ensemble"])
def test_classifier_scores_match_training_set_path(kind):
    rng = np.random.default_rng(5)
    words = [f"t{i}" for i in range(40)]
    docs = [Document(f"d{i:03d}", " ".join(rng.choice(words, size=int(rng.integers(3, 30)))))
            for i in range(150)]
    idx = build_index(docs)
    run = RankedList.from_scores("q", [(d.docid, float(rng.random())) for d in docs])
    cfg = PseudoLabelConfig(10, 100)
    fast = classifier_scores(idx, run, cfg, kind)
    pos, neg = select_pseudo_labels(run, cfg)
    ts = build_training_set(idx, pos, neg)
    vecs = [idx.doc_vector(d) for d in run.docids]
    if kind == "ensemble":
        slow = ensemble_scores(score_documents(train_logreg(ts), vecs),
                               score_documents(train_svm(ts), vecs))
    else:
        slow = score_documents((train_logreg if kind == "lr" else train_svm)(ts), vecs)
    np.testing.assert_allclose([fast[d] for d in run.docids], slow, atol=1e-9)
