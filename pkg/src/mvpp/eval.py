"""Clustering accuracy, ROC curves for influence rankings, cluster-wise LOOCV
and a K-means baseline."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .linalg_core import as_dense
from .tbpls import DataPair, loo_prediction_error

BRUTE_FORCE_MAX_K = 6


@dataclass(frozen=True)
class ConfusionMatching:
    confusion: np.ndarray  # rows: predicted labels, cols: true labels
    best_mapping: dict
    accuracy: float


def _confusion(predicted, truth):
    p_labels, p_idx = np.unique(predicted, return_inverse=True)
    t_labels, t_idx = np.unique(truth, return_inverse=True)
    k = max(p_labels.size, t_labels.size)
    conf = np.zeros((k, k), dtype=int)
    np.add.at(conf, (p_idx, t_idx), 1)
    return conf, p_labels, t_labels


def _match_brute(conf):
    k = conf.shape[0]
    best, best_perm = -1, None
    for perm in itertools.permutations(range(k)):
        score = conf[np.arange(k), perm].sum()
        if score > best:
            best, best_perm = score, perm
    return np.array(best_perm)


def _match_hungarian(conf):
    rows, cols = linear_sum_assignment(-conf)
    perm = np.empty(conf.shape[0], dtype=int)
    perm[rows] = cols
    return perm


def clustering_accuracy(predicted, truth, method: str = "auto") -> ConfusionMatching:
    """Accuracy under the best one-to-one relabelling of the predicted clusters."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError(f"label vectors differ in length: {predicted.size} vs {truth.size}")
    if predicted.size == 0:
        raise InvalidInputError("empty label vectors")
    conf, p_labels, t_labels = _confusion(predicted, truth)
    if method == "auto":
        method = "brute" if conf.shape[0] <= BRUTE_FORCE_MAX_K else "hungarian"
    perm = _match_brute(conf) if method == "brute" else _match_hungarian(conf)
    mapping = {
        p_labels[i].item(): t_labels[perm[i]].item()
        for i in range(p_labels.size)
        if perm[i] < t_labels.size
    }
    acc = conf[np.arange(conf.shape[0]), perm].sum() / predicted.size
    return ConfusionMatching(conf, mapping, float(acc))


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # cutoffs m = 0..n (0 is the origin)
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float

    def fpr_at_full_recall(self) -> float:
        return float(self.fpr[np.argmax(self.tpr >= 1.0)])


def roc_from_ranking(ranking, positives, n: int | None = None) -> RocCurve:
    """ROC of a ranking (0-based indices, most suspicious first) against known positives."""
    ranking = np.asarray(ranking)
    n = ranking.size if n is None else n
    positives = np.unique(np.asarray(positives))
    if positives.size == 0:
        raise InvalidInputError("need at least one positive")
    if positives.min() < 0 or positives.max() >= n:
        raise InvalidInputError("positive index out of range")
    if positives.size == n:
        raise InvalidInputError("need at least one negative")
    hit = np.isin(ranking, positives)
    tpr = np.concatenate([[0.0], np.cumsum(hit) / positives.size])
    fpr = np.concatenate([[0.0], np.cumsum(~hit) / (n - positives.size)])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(np.arange(n + 1), tpr, fpr, auc)


def average_roc(curves: list[RocCurve], grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vertical averaging: mean TPR of several curves on a common FPR grid."""
    grid = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid)
    tprs = []
    for c in curves:
        # right-continuous step: best TPR reached at or before each FPR
        idx = np.searchsorted(c.fpr, grid, side="right") - 1
        tprs.append(np.maximum.accumulate(c.tpr)[idx])
    return grid, np.mean(tprs, axis=0)


def clusterwise_loocv(assignments, data: DataPair, r: int = 1, min_cluster_size: int = 4, policy="center_and_scale") -> float:
    """Size-weighted mean of the full-refit LOO error within each cluster."""
    assignments = np.asarray(assignments)
    labels = np.unique(assignments)
    total = 0.0
    for c in labels:
        rows = np.flatnonzero(assignments == c)
        if rows.size < max(min_cluster_size, 4):
            raise InvalidInputError(f"cluster {c} has only {rows.size} points")
        _, mse = loo_prediction_error(data.subset(rows), r, policy)
        total += rows.size * mse
    return total / assignments.size


def kmeans_baseline(view, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; best of `restarts` runs. Labels are 1-based."""
    x = as_dense(view)
    n = x.shape[0]
    if k < 1 or k > n:
        raise InvalidInputError(f"k={k} must lie in [1, n={n}]")
    rng = np.random.default_rng(seed)
    best_labels, best_sse = None, np.inf
    for _ in range(restarts):
        centers = _kmeanspp(x, k, rng)
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iter):
            d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new = np.argmin(d2, axis=1)
            for c in range(k):
                members = new == c
                if members.any():
                    centers[c] = x[members].mean(axis=0)
                else:
                    # empty cluster: reseed at the point farthest from its center
                    far = np.argmax(d2[np.arange(n), new])
                    centers[c] = x[far]
                    new[far] = c
            if np.array_equal(new, labels):
                break
            labels = new
        sse = float(((x - centers[labels]) ** 2).sum())
        if sse < best_sse:
            best_sse, best_labels = sse, labels.copy()
    return best_labels + 1


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)
