import numpy as np
import pytest

from mvpp.errors import InvalidInputError
from mvpp.eval import (
    average_roc,
    clustering_accuracy,
    clusterwise_loocv,
    kmeans_baseline,
    roc_from_ranking,
)
from mvpp.simgen import ScenarioConfig, generate_scenario_a
from mvpp.tbpls import DataPair


def test_accuracy_perfect_and_relabelled():
    truth = np.array([1, 1, 2, 2, 3, 3])
    assert clustering_accuracy(truth, truth).accuracy == 1.0
    relabel = np.array([3, 3, 1, 1, 2, 2])
    m = clustering_accuracy(relabel, truth)
    assert m.accuracy == 1.0
    assert m.best_mapping == {3: 1, 1: 2, 2: 3}


def test_accuracy_counts_best_matching():
    truth = np.array([1, 1, 1, 2, 2, 2])
    pred = np.array([2, 2, 1, 1, 1, 1])
    assert clustering_accuracy(pred, truth).accuracy == pytest.approx(5 / 6)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_brute_force_and_hungarian_agree(k):
    rng = np.random.default_rng(k)
    for _ in range(20):
        truth = rng.integers(1, k + 1, 40)
        pred = rng.integers(1, k + 1, 40)
        a = clustering_accuracy(pred, truth, "brute").accuracy
        b = clustering_accuracy(pred, truth, "hungarian").accuracy
        assert a == b


def test_accuracy_invariant_to_relabelling_either_side():
    rng = np.random.default_rng(0)
    truth = rng.integers(1, 4, 30)
    pred = rng.integers(1, 4, 30)
    perm = np.array([0, 3, 1, 2])
    base = clustering_accuracy(pred, truth).accuracy
    assert clustering_accuracy(perm[pred], truth).accuracy == base
    assert clustering_accuracy(pred, perm[truth]).accuracy == base


def test_accuracy_length_mismatch():
    with pytest.raises(InvalidInputError):
        clustering_accuracy([1, 2], [1, 2, 1])


def test_roc_perfect_and_reversed():
    perfect = roc_from_ranking([2, 5, 0, 1, 3, 4], [2, 5])
    assert perfect.auc == 1.0
    assert perfect.fpr_at_full_recall() == 0.0
    worst = roc_from_ranking([0, 1, 3, 4, 2, 5], [2, 5])
    assert worst.auc == 0.0
    assert worst.fpr_at_full_recall() == 1.0


def test_roc_interleaved():
    curve = roc_from_ranking([0, 1, 2, 3], [0, 2])
    np.testing.assert_allclose(curve.tpr, [0, 0.5, 0.5, 1, 1])
    np.testing.assert_allclose(curve.fpr, [0, 0, 0.5, 0.5, 1])
    assert curve.auc == pytest.approx(0.75)


def test_roc_validation():
    with pytest.raises(InvalidInputError):
        roc_from_ranking([0, 1], [])
    with pytest.raises(InvalidInputError):
        roc_from_ranking([0, 1], [0, 1])
    with pytest.raises(InvalidInputError):
        roc_from_ranking([0, 1], [2])


def test_average_roc_bounds():
    rng = np.random.default_rng(1)
    curves = [roc_from_ranking(rng.permutation(20), [1, 5, 9]) for _ in range(10)]
    grid, tpr = average_roc(curves)
    assert tpr[0] >= 0 and tpr[-1] == 1.0
    assert np.all(np.diff(tpr) >= 0)


def test_kmeans_point_masses():
    x = np.vstack([np.zeros((5, 2)), np.full((5, 2), 10.0)])
    labels = kmeans_baseline(x, 2, seed=0)
    assert clustering_accuracy(labels, np.repeat([1, 2], 5)).accuracy == 1.0


def test_kmeans_deterministic():
    x = np.random.default_rng(2).standard_normal((30, 3))
    np.testing.assert_array_equal(kmeans_baseline(x, 3, seed=4), kmeans_baseline(x, 3, seed=4))


def test_kmeans_invalid_k():
    with pytest.raises(InvalidInputError):
        kmeans_baseline(np.zeros((3, 2)), 4)


def test_clusterwise_loocv_prefers_true_partition():
    wins = 0
    for seed in range(20):
        ds = generate_scenario_a(ScenarioConfig(n_per_cluster=20, p=15, q=15, seed=seed))
        data = DataPair.from_raw(ds.x, ds.y, "none")
        rand = np.random.default_rng(seed).permutation(ds.true_labels)
        wins += clusterwise_loocv(ds.true_labels, data, policy="none") < clusterwise_loocv(rand, data, policy="none")
    # one-sided sign test at the 5% level needs at least 15 of 20
    assert wins >= 15


def test_clusterwise_loocv_small_cluster():
    ds = generate_scenario_a(ScenarioConfig(n_per_cluster=10, p=5, q=5, seed=0))
    data = DataPair.from_raw(ds.x, ds.y, "none")
    a = np.ones(20, dtype=int)
    a[:3] = 2
    with pytest.raises(InvalidInputError):
        clusterwise_loocv(a, data)
