import dataclasses
import math

import numpy as np
import pydantic
import pytest

from muxfuse.errors import DatasetError, SplitError
from muxfuse.evaluation import (
    EvalConfig,
    EvaluationReport,
    SoftmaxRegression,
    check_split_classes,
    derive_seeds,
    evaluate_embeddings,
    kmeans,
    kmeans_nmi,
    logreg_macro_f1,
    macro_f1,
    nmi_score,
    sim_at_k,
)
from muxfuse.graph import Split, make_splits


def _separable(n_per_class: int = 20, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal([2.0, 0.0], 0.3, size=(n_per_class, 2)),
                   rng.normal([-2.0, 0.0], 0.3, size=(n_per_class, 2))])
    y = np.repeat([0, 1], n_per_class)
    return x, y


class TestMacroF1:

    def test_perfect_predictions(self):
        assert macro_f1([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0

    def test_hand_computed_confusion(self):
        assert macro_f1([0, 1], [0, 0]) == pytest.approx(1 / 3)

    def test_separable_embeddings(self):
        x, y = _separable()
        split = Split(train=np.arange(0, 40, 2), val=np.array([1]), test=np.arange(1, 40, 2))
        mean, std, scores = logreg_macro_f1(x, y, split, seeds=[0, 1], steps=300)
        assert mean == 1.0 and std == 0.0 and len(scores) == 2

    def test_unseen_test_class(self):
        labels = np.array([0, 0, 1, 1])
        with pytest.raises(SplitError, match="absent"):
            check_split_classes(labels, Split(train=np.array([0, 1]), val=np.array([]), test=np.array([2, 3])))


class TestSoftmaxRegression:

    def test_estimator_protocol(self):
        x, y = _separable()
        clf = SoftmaxRegression(steps=200).fit(x, y)
        proba = clf.predict_proba(x)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        assert clf.score(x, y) == 1.0
        assert clf.coef_.shape == (2, 2) and clf.intercept_.shape == (2,)
        assert clf.loss_curve_[-1] < clf.loss_curve_[0]
        assert clf.get_params()["steps"] == 200

    def test_keeps_original_labels(self):
        x, _ = _separable(5)
        y = np.array(["b"] * 5 + ["a"] * 5)
        clf = SoftmaxRegression(steps=100).fit(x, y)
        assert list(clf.classes_) == ["a", "b"]
        assert set(clf.predict(x)) <= {"a", "b"}

    def test_seeded(self):
        x, y = _separable()
        a = SoftmaxRegression(steps=20, random_state=3).fit(x, y).coef_
        b = SoftmaxRegression(steps=20, random_state=3).fit(x, y).coef_
        np.testing.assert_array_equal(a, b)


class TestClustering:

    def test_identical_partition(self):
        assert nmi_score([0, 0, 1, 1, 2], [2, 2, 0, 0, 1]) == pytest.approx(1.0)

    def test_single_cluster(self):
        assert nmi_score([0, 0, 1, 1], [0, 0, 0, 0]) == pytest.approx(0.0)

    def test_separated_blobs(self):
        rng = np.random.default_rng(0)
        centers = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        labels = np.repeat([0, 1, 2], 15)
        z = centers[labels] + rng.normal(scale=0.01, size=(45, 2))
        mean, std, scores = kmeans_nmi(z, labels, 3, seeds=10)
        assert len(scores) == 10
        assert mean == pytest.approx(1.0) and std == pytest.approx(0.0)

    def test_inertia_never_increases(self):
        z = np.random.default_rng(1).normal(size=(60, 3))
        _, centers, history = kmeans(z, 4, seed=2)
        assert centers.shape == (4, 3)
        assert all(b <= a * (1 + 1e-12) for a, b in zip(history, history[1:]))

    def test_scored_on_subset(self):
        labels = np.array([0, 0, 0, 1, 1, 1])
        z = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]])
        mean, _, _ = kmeans_nmi(z, labels, 2, seeds=2, eval_index=np.array([0, 3]))
        assert mean == pytest.approx(1.0)


class TestSimAtK:

    def test_single_class(self):
        z = np.random.default_rng(0).normal(size=(10, 3))
        assert sim_at_k(z, np.zeros(10, dtype=int)) == 1.0

    def test_class_indicator_embeddings(self):
        labels = np.repeat([0, 1], 6)
        assert sim_at_k(np.eye(2)[labels], labels) == 1.0

    def test_random_embeddings_near_prior(self):
        rng = np.random.default_rng(4)
        labels = np.repeat([0, 1], 100)
        assert sim_at_k(rng.normal(size=(200, 16)), labels) == pytest.approx(0.5, abs=0.1)

    def test_zero_row(self):
        with pytest.raises(DatasetError, match="Node 2"):
            sim_at_k(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]), np.array([0, 1, 0]), k=1)

    def test_rotation_and_rescaling_invariance(self):
        rng = np.random.default_rng(6)
        z = rng.normal(size=(15, 4))
        labels = rng.integers(0, 3, size=15)
        rotation, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        scale = rng.uniform(0.1, 10.0, size=(15, 1))
        base = sim_at_k(z, labels)
        assert sim_at_k(z @ rotation, labels) == base
        assert sim_at_k(scale * z, labels) == base


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seeds(0, 5) == derive_seeds(0, 5)
    assert len(set(derive_seeds(0, 5))) == 5
    assert derive_seeds(0, 3) != derive_seeds(1, 3)


class TestEvaluateEmbeddings:

    @pytest.fixture
    def cfg(self):
        return EvalConfig(classifier_seeds=2, classifier_steps=100, kmeans_seeds=3)

    def test_all_tasks(self, toy_graph, cfg):
        split = make_splits(toy_graph, (0.4, 0.2, 0.4), seed=0)
        report = evaluate_embeddings(toy_graph.features.values, toy_graph, split, cfg)
        for value in (report.macro_f1, report.val_macro_f1, report.nmi, report.sim_at_5):
            assert 0.0 <= value <= 1.0
        assert len(report.classifier_seeds) == 2 and len(report.kmeans_seeds) == 3
        assert report.metadata == {"nmi_scope": "test", "sim_scope": "all"}

    def test_same_seed_same_numbers(self, toy_graph, cfg):
        split = make_splits(toy_graph, (0.4, 0.2, 0.4), seed=0)
        a = evaluate_embeddings(toy_graph.features.values, toy_graph, split, cfg, seed=5)
        b = evaluate_embeddings(toy_graph.features.values, toy_graph, split, cfg, seed=5)
        assert a.model_dump(exclude={"timing_s"}) == b.model_dump(exclude={"timing_s"})

    def test_classification_only(self, toy_graph):
        split = make_splits(toy_graph, (0.4, 0.2, 0.4), seed=0)
        report = evaluate_embeddings(toy_graph.features.values, toy_graph, split,
                                     EvalConfig(classifier_seeds=1, classifier_steps=20, tasks=("clf",)))
        assert report.macro_f1 is not None
        assert report.nmi is None and report.sim_at_5 is None

    def test_unlabeled_graph(self, toy_graph):
        g = dataclasses.replace(toy_graph, labels=None)
        report = evaluate_embeddings(g.features.values, g, Split(np.array([0]), np.array([1]), np.array([2])))
        assert report.macro_f1 is None and report.nmi is None

    def test_scores_outside_unit_range_are_rejected(self):
        with pytest.raises(pydantic.ValidationError):
            EvaluationReport(macro_f1=1.5)


def _f1_by_enumeration(y_true: list[int], y_pred: list[int]) -> float:
    scores = []
    for c in sorted(set(y_true) | set(y_pred)):
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        scores.append(2 * tp / (2 * tp + fp + fn))
    return sum(scores) / len(scores)


def _nmi_by_contingency(y_true: list[int], y_pred: list[int]) -> float:
    n = len(y_true)
    classes, clusters = sorted(set(y_true)), sorted(set(y_pred))
    if len(classes) == len(clusters) == 1:
        return 1.0
    table = [[sum(t == a and p == b for t, p in zip(y_true, y_pred)) for b in clusters] for a in classes]
    rows = [sum(r) for r in table]
    cols = [sum(r[j] for r in table) for j in range(len(clusters))]
    mi = sum(nij / n * math.log(n * nij / (rows[i] * cols[j]))
             for i, r in enumerate(table) for j, nij in enumerate(r) if nij)
    h_true = -sum(a / n * math.log(a / n) for a in rows)
    h_pred = -sum(b / n * math.log(b / n) for b in cols)
    return mi / ((h_true + h_pred) / 2)


def _sim_by_sorting(z: np.ndarray, labels: list[int], k: int) -> float:
    n = len(labels)
    hits = 0
    for i in range(n):
        def cosine(j: int) -> float:
            dot = sum(a * b for a, b in zip(z[i], z[j]))
            return round(dot / (math.sqrt(sum(a * a for a in z[i])) * math.sqrt(sum(b * b for b in z[j]))), 12)

        ranked = sorted((j for j in range(n) if j != i), key=lambda j: (-cosine(j), j))
        hits += sum(labels[j] == labels[i] for j in ranked[:k])
    return hits / (n * k)


class TestAgainstBruteForce:
    """Randomized small instances scored both by the metrics and by direct enumeration."""

    INSTANCES = 200

    @staticmethod
    def _labels(rng: np.random.Generator, n: int) -> list[int]:
        return rng.integers(0, rng.integers(1, 5), size=n).tolist()

    def test_macro_f1(self):
        rng = np.random.default_rng(100)
        for _ in range(self.INSTANCES):
            n = int(rng.integers(1, 21))
            y_true, y_pred = self._labels(rng, n), self._labels(rng, n)
            assert macro_f1(y_true, y_pred) == pytest.approx(_f1_by_enumeration(y_true, y_pred), abs=1e-12)

    def test_nmi(self):
        rng = np.random.default_rng(101)
        for _ in range(self.INSTANCES):
            n = int(rng.integers(2, 21))
            y_true, y_pred = self._labels(rng, n), self._labels(rng, n)
            assert nmi_score(y_true, y_pred) == pytest.approx(_nmi_by_contingency(y_true, y_pred), abs=1e-12)

    def test_sim_at_k(self):
        rng = np.random.default_rng(102)
        for _ in range(self.INSTANCES):
            n = int(rng.integers(2, 21))
            k = int(rng.integers(1, min(5, n - 1) + 1))
            # small integer coordinates make exact similarity ties common
            z = rng.integers(-2, 3, size=(n, 3)).astype(np.float64)
            z[np.linalg.norm(z, axis=1) == 0] = [1.0, 0.0, 0.0]
            labels = self._labels(rng, n)
            assert sim_at_k(z, np.array(labels), k=k) == pytest.approx(_sim_by_sorting(z, labels, k), abs=1e-12)
