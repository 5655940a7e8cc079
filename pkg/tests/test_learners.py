import numpy as np
import pytest

from fundusrank import learners
from fundusrank.errors import DataError
from fundusrank.learners import _tree
from fundusrank.table import FeatureTable
from oracles import knn_bruteforce


def table(values, labels, ids=None):
    values = np.asarray(values, dtype=float)
    n = len(values)
    ids = ids if ids is not None else [f"s{i:05d}" for i in range(n)]
    return FeatureTable(values, [f"f{j}" for j in range(values.shape[1])], labels, ids)


def blobs(n, centers, spread=1.0, seed=0, noise_dims=0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    y = np.arange(n) % len(centers)
    X = centers[y] + rng.normal(0, spread, (n, centers.shape[1]))
    if noise_dims:
        X = np.hstack([X, rng.normal(size=(n, noise_dims))])
    return table(X, y)


def test_bdt_separable_blobs():
    t = blobs(400, [[0, 0], [6, 6]])
    model = learners.train_bdt(t)
    labels, scores = learners.predict(model, t.values)
    assert np.mean(labels == t.labels) >= 0.99
    assert scores.shape == (400, 2) and np.all((scores >= 0) & (scores <= 1))
    np.testing.assert_allclose(scores.sum(axis=1), 1.0)


def test_bdt_six_classes_gives_six_score_columns():
    t = blobs(600, np.eye(6) * 5, seed=1)
    model = learners.train_bdt(t, {"n_trees": 20})
    labels, scores = learners.predict(model, t.values)
    assert scores.shape == (600, 6) and len(model.loss_trace) == 6
    assert np.array_equal(labels, np.asarray(model.class_ids)[scores.argmax(axis=1)])
    assert np.mean(labels == t.labels) > 0.9


def test_bdt_duplicated_rows_give_identical_predictions():
    t = blobs(150, [[0, 0, 0], [1.5, 1, 0]], spread=1.2, seed=2)
    doubled = table(np.vstack([t.values, t.values]), np.r_[t.labels, t.labels])
    q = np.random.default_rng(3).normal(0.7, 1.5, (200, 3))
    a = learners.predict(learners.train_bdt(t), q)[1]
    b = learners.predict(learners.train_bdt(doubled), q)[1]
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["BDT", "DF"])
def test_row_permutation_invariance(kind):
    t = blobs(240, [[0, 0, 0], [1.5, 1, 0], [0, 2, 1]], spread=1.2, seed=4)
    perm = np.random.default_rng(5).permutation(t.n)
    shuffled = table(t.values[perm], t.labels[perm], t.sample_ids[perm])
    q = np.random.default_rng(6).normal(0.7, 1.5, (100, 3))
    params = {"n_trees": 25}
    a = learners.predict(learners.train(kind, t, params, seed=3), q)[1]
    b = learners.predict(learners.train(kind, shuffled, params, seed=3), q)[1]
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["BDT", "DF", "KNN"])
def test_determinism(kind):
    t = blobs(200, [[0, 0], [1, 1]], spread=1.0, seed=7)
    q = np.random.default_rng(8).normal(0.5, 1, (80, 2))
    a = learners.predict(learners.train(kind, t, seed=11), q)
    b = learners.predict(learners.train(kind, t, seed=11), q)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_df_seed_changes_forest():
    t = blobs(200, [[0, 0], [1, 1]], spread=1.0, seed=7)
    q = np.random.default_rng(8).normal(0.5, 1, (80, 2))
    a = learners.predict(learners.train_df(t, seed=1), q)[1]
    b = learners.predict(learners.train_df(t, seed=2), q)[1]
    assert not np.array_equal(a, b)


def test_bdt_training_loss_non_increasing():
    t = blobs(200, [[0, 0, 0, 0], [1, 0.5, 0, 0]], spread=1.0, seed=9)
    for params in ({}, {"class_weight": "balanced"}):
        model = learners.train_bdt(t, params)
        (trace,) = model.loss_trace
        assert len(trace) == 101  # initial loss plus one entry per round
        assert np.all(np.diff(trace) <= 1e-12)


def test_df_step_function_and_vote_fractions():
    x = np.linspace(0, 1, 120)
    t = table(x[:, None], (x > 0.37).astype(int))
    model = learners.train_df(t)
    labels, scores = learners.predict(model, t.values)
    assert np.array_equal(labels, t.labels)
    assert np.all(np.isclose(scores * 100, np.round(scores * 100)))  # fractions of 100 votes
    np.testing.assert_allclose(scores.sum(axis=1), 1.0)


def test_binary_positive_scores_in_unit_interval():
    t = blobs(300, [[0, 0], [1, 1]], spread=1.5, seed=10)
    for kind in learners.KINDS:
        _, s = learners.predict(learners.train(kind, t), t.values)
        assert np.all(np.isfinite(s)) and np.all((s[:, 1] >= 0) & (s[:, 1] <= 1))


def test_knn_examples():
    t = blobs(60, [[0, 0], [3, 3]], seed=12)
    one = learners.train_knn(t, {"k": 1})
    assert np.array_equal(learners.predict(one, t.values)[0], t.labels)
    # k = n on balanced data: 30 votes each, the closer class on average wins
    full = learners.train_knn(t, {"k": 60})
    labels, scores = learners.predict(full, np.array([[-1.0, -1.0], [4.0, 4.0]]))
    assert labels.tolist() == [0, 1]
    np.testing.assert_array_equal(scores, 0.5)
    with pytest.raises(ValueError):
        learners.train_knn(t, {"k": 61})


def test_knn_matches_bruteforce():
    t = blobs(150, [[0, 0, 0], [2, 0, 1], [0, 2, 2]], spread=1.3, seed=13)
    q = np.random.default_rng(14).normal(0.8, 1.5, (60, 3))
    for k in (1, 4, 5, 9):
        got = learners.predict(learners.train_knn(t, {"k": k}), q)[0]
        want = knn_bruteforce(t.values.tolist(), t.labels.tolist(), q.tolist(), k)
        assert got.tolist() == want


def test_dimension_mismatch_and_single_class():
    t = blobs(40, [[0, 0], [3, 3]])
    model = learners.train_df(t, {"n_trees": 5})
    with pytest.raises(ValueError, match="expected 2 features, got 3"):
        learners.predict(model, np.zeros((2, 3)))
    with pytest.raises(ValueError, match="2 classes"):
        learners.train_bdt(table(np.zeros((5, 2)), [1] * 5))
    with pytest.raises(ValueError, match="unknown"):
        learners.train_bdt(t, {"depth": 3})
    with pytest.raises(ValueError, match="unknown classifier"):
        learners.train("SVM", t)


@pytest.mark.parametrize("kind", ["BDT", "DF", "KNN"])
def test_persistence_roundtrip(kind, tmp_path):
    t = blobs(200, [[0, 0, 0], [1, 1, 0], [0, 1, 1]], spread=1.0, seed=15)
    model = learners.train(kind, t, {"n_trees": 10} if kind != "KNN" else None, seed=4)
    learners.save_model(model, tmp_path / "m.json")
    back = learners.load_model(tmp_path / "m.json")
    q = np.random.default_rng(16).normal(0.5, 1, (50, 3))
    a, b = learners.predict(model, q), learners.predict(back, q)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert (back.kind, back.train_seed, back.class_ids) == (kind, 4, [0, 1, 2])
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        learners.load_model(tmp_path / "bad.json")


@pytest.mark.parametrize("kind", ["BDT", "DF"])
def test_dense_and_sparse_scans_agree(kind, monkeypatch):
    t = blobs(300, [[0, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 0]], spread=1.0, seed=17, noise_dims=3)
    q = np.random.default_rng(18).normal(0.5, 1, (100, 7))
    params = {"n_trees": 15}
    out = []
    for ratio in (0.0, float("inf")):
        monkeypatch.setattr(_tree, "SPARSE_RATIO", ratio)
        out.append(learners.predict(learners.train(kind, t, params, seed=5), q)[1])
    np.testing.assert_array_equal(out[0], out[1])


def test_select_classifier_rules():
    t = blobs(200, [[0, 0], [3, 3]], seed=19)
    assert learners.select_classifier([("KNN", None)], t) == "KNN"
    # a perfectly learnable task: every kind errs zero times, so the first candidate wins
    easy = blobs(200, [[0, 0], [40, 40]], spread=0.1, seed=20)
    assert learners.select_classifier([("DF", {"n_trees": 5}), ("BDT", {"n_trees": 5})], easy) == "DF"
    with pytest.raises(ValueError):
        learners.select_classifier([], t)


def test_select_classifier_prefers_trees_on_axis_aligned_task():
    # label depends on one coordinate; many high-variance noise columns swamp kNN distances
    rng = np.random.default_rng(21)
    n = 400
    signal = rng.uniform(0, 1, n)
    X = np.column_stack([signal, rng.normal(0, 1, (n, 30))])
    t = table(X, (signal > 0.5).astype(int))
    best, errors = learners.select_classifier(
        [("KNN", None), ("DF", {"n_trees": 30}), ("BDT", {"n_trees": 30})], t, return_errors=True)
    assert best in ("DF", "BDT")
    assert errors[0] > min(errors[1:]) + 0.1


def test_binning_thresholds_are_midpoints():
    X = np.array([[0.0], [1.0], [1.0], [3.0]])
    b = _tree.Binning.fit(X)
    np.testing.assert_array_equal(b.thresholds[0], [0.5, 2.0])
    assert b.transform(np.array([[0.5], [0.6], [5.0]])).ravel().tolist() == [0, 1, 2]
