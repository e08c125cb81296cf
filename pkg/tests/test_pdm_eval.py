import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_windows
from oracles import exact_features
from pdmsynth.pdm_eval import (
    BatchInputs, ClassifierConfig, aggregate, evaluate, extract_features, fault_probe, feature_matrix,
    report_from_predictions, run_three_batches, train_classifier,
)


def test_zero_window_features():
    assert not extract_features(np.zeros((32, 2))).any()


def test_sine_features():
    t = np.linspace(0, 200 * np.pi, 200_001)
    f = extract_features(np.sin(t)[:, None])
    assert f[0] == pytest.approx(1 / np.sqrt(2), abs=1e-3)
    assert f[2] == pytest.approx(np.sqrt(2), abs=1e-3)
    assert f[1] == pytest.approx(2.0, abs=1e-6)


@given(st.integers(0, 2**31 - 1))
def test_features_match_fsum_oracle(seed):
    x = np.random.default_rng(seed).standard_t(4, size=(256, 2))
    np.testing.assert_allclose(extract_features(x), exact_features(x), rtol=1e-9, atol=1e-9)


def test_crest_at_least_one(rng):
    f = feature_matrix(make_windows(rng.normal(size=(10, 64, 2))))
    assert np.all(f[:, [2, 8]] >= 1)


def _separable(rng, n=60):
    X = np.vstack([rng.normal(-3, 1, (n, 4)), rng.normal(3, 1, (n, 4))])
    return X, np.r_[np.zeros(n), np.ones(n)].astype(bool)


def test_separable_fixture_is_learned(rng):
    X, y = _separable(rng)
    m = train_classifier(X, y, ClassifierConfig(epochs=200))
    assert np.mean(m.predict(X) == y) == 1.0
    m2 = train_classifier(X, y, ClassifierConfig(epochs=200))
    assert np.array_equal(m.weights, m2.weights)
    assert np.all(m.scale > 0)


def test_classifier_errors(rng):
    X, y = _separable(rng)
    with pytest.raises(ValueError, match="empty"):
        train_classifier(np.zeros((0, 4)), [], ClassifierConfig())
    with pytest.raises(ValueError, match="absent class"):
        train_classifier(X, np.zeros(len(X)), ClassifierConfig())
    train_classifier(X, np.zeros(len(X)), ClassifierConfig(class_weighting="none"))


def test_report_examples():
    perfect = report_from_predictions([0, 1, 1, 0], [0, 1, 1, 0])
    assert all(v == 1.0 for c in perfect.per_class.values() for k, v in c.items() if k != "support")
    none = report_from_predictions([1] * 10 + [0] * 5, [0] * 15)
    assert none.per_class["faulty"]["recall"] == 0 and none.per_class["faulty"]["precision"] == 0
    assert none.per_class["faulty"]["f1"] == 0
    y_true = [1, 1, 1, 1, 1, 0, 0]
    y_pred = [1, 1, 1, 0, 0, 1, 0]
    rep = report_from_predictions(y_true, y_pred)
    f = rep.per_class["faulty"]
    assert (f["precision"], f["recall"]) == (0.75, 0.6)
    assert f["f1"] == pytest.approx(2 / 3, abs=1e-12)
    assert rep.confusion == [[1, 1], [2, 3]]


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50))
def test_report_arithmetic(pairs):
    y, p = zip(*pairs)
    rep = report_from_predictions(y, p)
    assert sum(map(sum, rep.confusion)) == len(pairs)
    for c in rep.per_class.values():
        for k in ("precision", "recall", "f1"):
            assert 0.0 <= c[k] <= 1.0
        pr, rc = c["precision"], c["recall"]
        expect = 2 * pr * rc / (pr + rc) if pr + rc else 0.0
        assert abs(c["f1"] - expect) <= 1e-12
    assert rep.per_class["healthy"]["support"] + rep.per_class["faulty"]["support"] == len(pairs)


def _fleet(rng):
    """Bearing 0 fails loudly in channel 0. Bearing 1 runs loud in channel 1 while healthy and
    its faults look exactly like bearing 0's healthy windows, so A gives no hint of them."""
    def win(b, i, faulty):
        v = rng.normal(size=(64, 2)) * 0.3
        if b == 0 and faulty:
            v[:, 0] *= 6
        if b == 1 and not faulty:
            v[:, 1] *= 2
        return v, b, i, faulty
    rows = [win(0, i, i >= 10) for i in range(20)] + [win(1, i, i >= 10) for i in range(20)]
    from pdmsynth.data_ingest import SampleWindow
    ws = [SampleWindow(*r) for r in rows]
    A = ws[:20] + ws[20:23]
    U = ws[23:]
    return A, U


def test_three_batches_structure_and_missing_generators(rng):
    A, U = _fleet(rng)
    lto = {1: (A, U)}
    synth = [w for w in U]
    entries = run_three_batches(BatchInputs(A, U, [1], lto, synth, {1: synth}), seed=0)
    assert [e["batch"] for e in entries] == [1, 2, 3]
    assert entries[0]["classes"]["faulty"]["recall"] == 0.0
    assert entries[1]["classes"]["faulty"]["f1"] >= entries[0]["classes"]["faulty"]["f1"]
    agg = aggregate(entries)
    assert set(agg) == {"1", "2", "3"} and agg["1"]["n_models"] == 1
    with pytest.raises(ValueError, match="batch 2"):
        run_three_batches(BatchInputs(A, U, [1], lto), seed=0)
    with pytest.raises(ValueError, match="leave-target-out"):
        run_three_batches(BatchInputs(A, U, [1], lto, synth), seed=0)


def test_fault_probe_scores(rng):
    A, U = _fleet(rng)
    probe = fault_probe(A + U)
    s = probe(U)
    faulty = np.array([w.is_faulty for w in U])
    assert s[faulty].mean() > s[~faulty].mean()


def test_evaluate_rejects_empty(rng):
    X, y = _separable(rng)
    m = train_classifier(X, y)
    with pytest.raises(ValueError):
        evaluate(m, np.zeros((0, 4)), [])
