"""Seeded synthetic data: geometric clusters, confounded predictive clusters,
influential-observation sets and the line/plane toy example.

Generators return raw (unstandardized) views; wrap them with
``DataPair.from_raw`` before fitting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .tbpls import DataPair

log = logging.getLogger(__name__)

SNR_GRID = (10**0.1, 10**-0.2, 10**-0.5)


@dataclass(frozen=True)
class ScenarioConfig:
    k: int = 2
    n_per_cluster: int = 50
    p: int = 200
    q: int = 200
    snr: float = 10**0.1
    latent_offdiag: float = 0.9
    mu: tuple[tuple[float, float], ...] | None = None
    c1: float = 6.0
    c2: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.n_per_cluster < 1 or self.p < 1 or self.q < 1:
            raise InvalidInputError("sizes must be positive")
        if not self.snr > 0:
            raise InvalidInputError("snr must be positive (use np.inf for noiseless data)")
        if not abs(self.latent_offdiag) < 1:
            raise InvalidInputError("latent_offdiag must lie in (-1, 1)")
        if self.mu is not None and len(self.mu) != self.k:
            raise InvalidInputError("need one latent mean pair per cluster")

    def latent_means(self) -> np.ndarray:
        if self.mu is not None:
            return np.asarray(self.mu, dtype=float)
        # evenly spaced on the diagonal; (2, 2) and (-2, -2) for two clusters
        m = np.linspace(2.0, -2.0, self.k) if self.k > 1 else np.zeros(1)
        return np.column_stack([m, m])


@dataclass(frozen=True)
class LabeledDataset:
    data: DataPair
    true_labels: np.ndarray  # 1-based cluster ids
    generator_tag: str
    influential_indices: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.data.x

    @property
    def y(self) -> np.ndarray:
        return self.data.y


def _noise_sd(signal: np.ndarray, snr: float) -> float:
    if np.isinf(snr):
        return 0.0
    return float(np.sqrt(signal.var() / snr))


def _latent_pairs(rng, mean, offdiag, n):
    cov = np.array([[1.0, offdiag], [offdiag, 1.0]])
    ts = rng.multivariate_normal(mean, cov, size=n)
    return ts[:, 0], ts[:, 1]


def _cluster_weights(rng, p, q):
    w = np.concatenate([rng.uniform(0.0, 1.0, p // 2), rng.uniform(1.0, 2.0, p - p // 2)])
    # N(0, w w') is rank one: a scalar normal times w
    u = rng.standard_normal() * w
    v = rng.uniform(0.0, 1.0, q)
    return u / np.linalg.norm(u), v / np.linalg.norm(v)


def _signal(cfg: ScenarioConfig, rng):
    mu = cfg.latent_means()
    xs, ys, labels, us = [], [], [], []
    for k in range(cfg.k):
        t, s = _latent_pairs(rng, mu[k], cfg.latent_offdiag, cfg.n_per_cluster)
        u, v = _cluster_weights(rng, cfg.p, cfg.q)
        xs.append(np.outer(t, u))
        ys.append(np.outer(s, v))
        labels.append(np.full(cfg.n_per_cluster, k + 1))
        us.append(u)
    return np.vstack(xs), np.vstack(ys), np.concatenate(labels), us


def generate_scenario_a(cfg: ScenarioConfig = ScenarioConfig()) -> LabeledDataset:
    """Geometric clusters: one rank-one TB-PLS model per cluster plus i.i.d. noise in both views."""
    rng = np.random.default_rng(cfg.seed)
    sx, sy, labels, _ = _signal(cfg, rng)
    sd_x = _noise_sd(sx, cfg.snr)
    sd_y = _noise_sd(sy, cfg.snr)
    x = sx + sd_x * rng.standard_normal(sx.shape)
    y = sy + sd_y * rng.standard_normal(sy.shape)
    return LabeledDataset(
        DataPair(x, y), labels, "scenario_a", meta={"noise_sd_x": sd_x, "noise_sd_y": sd_y}
    )


def _translation_direction(p: int, weights: list[np.ndarray]) -> np.ndarray:
    # the all-ones direction with the cluster weight vectors projected out, so
    # that the shift moves points geometrically without touching their scores
    d = np.ones(p)
    basis, _ = np.linalg.qr(np.column_stack(weights))
    d -= basis @ (basis.T @ d)
    norm = np.linalg.norm(d)
    if norm < 1e-12:
        raise InvalidInputError("p too small to translate orthogonally to the cluster weights")
    return d / norm


def _confounded(x, labels, k1_parts) -> bool:
    c2_center = x[labels == 2].mean(axis=0)
    for part in k1_parts:
        rest = np.setdiff1d(np.flatnonzero(labels == 1), part)
        own = x[part].mean(axis=0)
        if np.linalg.norm(own - c2_center) < np.linalg.norm(own - x[rest].mean(axis=0)):
            return True
    return False


def generate_scenario_b(cfg: ScenarioConfig = ScenarioConfig()) -> LabeledDataset:
    """Predictive clusters hidden behind confounding geometry.

    Cluster 1's X rows are shifted by +c1 / 0 / -c1 in thirds and cluster
    2's by +c2/2 / -c2/2 in halves, along a unit direction orthogonal to
    both clusters' X weights. Both shift patterns have zero mean, so the
    translations do not leak into either cluster's fitted weights. Noise is
    added to Y only.
    """
    if cfg.k != 2:
        raise InvalidInputError("scenario B is defined for two clusters")
    if cfg.n_per_cluster % 6:
        raise InvalidInputError("n_per_cluster must be divisible by 6 for scenario B")
    rng = np.random.default_rng(cfg.seed)
    sx, sy, labels, us = _signal(cfg, rng)
    sd_y = _noise_sd(sy, cfg.snr)
    y = sy + sd_y * rng.standard_normal(sy.shape)

    d = _translation_direction(cfg.p, us)
    nk = cfg.n_per_cluster
    shift = np.zeros(labels.size)
    shift[: nk // 3] = cfg.c1
    shift[2 * nk // 3 : nk] = -cfg.c1
    shift[nk : nk + nk // 2] = cfg.c2 / 2.0
    shift[nk + nk // 2 :] = -cfg.c2 / 2.0
    x = sx + np.outer(shift, d)

    thirds = [np.arange(0, nk // 3), np.arange(nk // 3, 2 * nk // 3), np.arange(2 * nk // 3, nk)]
    confounded = _confounded(x, labels, thirds) if (cfg.c1 or cfg.c2) else False
    if (cfg.c1 or cfg.c2) and not confounded:
        log.warning("scenario B translations (c1=%s, c2=%s) do not produce confounding clusters", cfg.c1, cfg.c2)
    return LabeledDataset(
        DataPair(x, y),
        labels,
        "scenario_b",
        meta={"noise_sd_y": sd_y, "confounded": bool(confounded)},
    )


def generate_influence_dataset(
    dims: str = "lowdim",
    seed: int = 0,
    n: int = 100,
    n_influential: int = 3,
    perturbation_scale: float = 1.0,
) -> LabeledDataset:
    """Homogeneous one-factor data with a few X rows knocked off the predictive relation.

    ``lowdim`` uses p = q = 2 and ``highdim`` p = q = 200. Latent pairs are
    bivariate normal with correlation 0.9; loadings are Unif(0, 1).
    """
    if dims not in ("lowdim", "highdim"):
        raise InvalidInputError(f"dims must be 'lowdim' or 'highdim', got {dims!r}")
    p = q = 2 if dims == "lowdim" else 200
    rng = np.random.default_rng(seed)
    t, s = _latent_pairs(rng, np.zeros(2), 0.9, n)
    p_load = rng.uniform(0.0, 1.0, p)
    q_load = rng.uniform(0.0, 1.0, q)
    x = np.outer(t, p_load)
    y = np.outer(s, q_load)
    idx = np.sort(rng.choice(n, size=n_influential, replace=False))
    x[idx] += perturbation_scale * rng.standard_normal((n_influential, p))
    return LabeledDataset(
        DataPair(x, y),
        np.ones(n, dtype=int),
        f"influence_{dims}",
        influential_indices=idx,
    )


def generate_line_plane(seed: int = 0, n_per_cluster: int = 60, noise_sd: float = 0.05) -> LabeledDataset:
    """Two intersecting subspaces in R^3: a line (cluster 1) and a plane (cluster 2).

    Each cluster's Y is its own linear map of X plus Gaussian noise.
    """
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    line = basis[:, :1]
    plane = np.linalg.qr(np.column_stack([basis[:, 0] + basis[:, 1], basis[:, 2]]))[0]
    a = rng.uniform(-1.0, 1.0, (n_per_cluster, 1))
    b = rng.uniform(-1.0, 1.0, (n_per_cluster, 2))
    x1 = a @ line.T
    x2 = b @ plane.T
    w1 = rng.standard_normal((3, 3))
    w2 = rng.standard_normal((3, 3))
    y1 = x1 @ w1 + noise_sd * rng.standard_normal((n_per_cluster, 3))
    y2 = x2 @ w2 + noise_sd * rng.standard_normal((n_per_cluster, 3))
    labels = np.repeat([1, 2], n_per_cluster)
    return LabeledDataset(
        DataPair(np.vstack([x1, x2]), np.vstack([y1, y2])),
        labels,
        "line_plane",
        meta={"noiseless_x": (x1, x2)},
    )


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, seed=seed)
