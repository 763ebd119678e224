"""Multi-view predictive partitioning.

Alternates an assignment step (each point goes to the cluster under whose
model its predictive influence is smallest) with an estimation step (one
TB-PLS fit per cluster), from several random starting partitions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateClusterError, InvalidInputError
from .influence import influence_magnitudes
from .tbpls import DataPair, TbplsModel, fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MvppConfig:
    k: int = 2
    r_per_cluster: tuple[int, ...] | None = None
    max_iterations: int = 100
    restarts: int = 10
    objective_tolerance: float = 1e-6
    min_cluster_size: int | None = None
    seed: int = 0
    center_clusters: bool = False
    influence_scale: str = "sum"
    r_max_in_loop: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.restarts < 1:
            raise InvalidInputError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if self.r_per_cluster is not None and len(self.r_per_cluster) != self.k:
            raise InvalidInputError("r_per_cluster needs one entry per cluster")
        if self.min_cluster_size is not None and self.min_cluster_size < 3:
            raise InvalidInputError("min_cluster_size must be >= 3")
        if self.influence_scale not in ("sum", "mean"):
            raise InvalidInputError("influence_scale must be 'sum' or 'mean'")
        if self.r_max_in_loop is not None and self.r_max_in_loop < 1:
            raise InvalidInputError("r_max_in_loop must be >= 1")

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(self.r_per_cluster) if self.r_per_cluster is not None else (1,) * self.k

    @property
    def min_size(self) -> int:
        if self.min_cluster_size is not None:
            return self.min_cluster_size
        top = max(self.ranks) if self.r_max_in_loop is None else max(max(self.ranks), self.r_max_in_loop)
        return max(3, top + 2)


@dataclass
class MvppState:
    assignments: np.ndarray  # 1-based cluster ids
    models: list[TbplsModel]
    objective: float
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    degenerate: bool = False
    restart_index: int = 0
    restart_objectives: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.models)


def _scored(model, ctx, pts_x, pts_y, member, scale):
    mags, bad = influence_magnitudes(model, ctx, pts_x, pts_y, member)
    if scale == "sum":
        # gradient of the summed rather than the averaged PRESS: removes the
        # 1/n_k^2 factor that would otherwise pull every point into the
        # largest cluster
        size = np.where(np.asarray(member) >= 0, ctx.n, ctx.n + 1)
        mags = mags * size.astype(float) ** 2
    return mags, bad


def influence_matrix(
    models: list[TbplsModel], assignments: np.ndarray, data: DataPair, scale: str = "sum"
) -> tuple[np.ndarray, np.ndarray]:
    """Squared influence of every point under every cluster model.

    Members of cluster k are scored over cluster k's rows; other points are
    scored as one extra row appended to cluster k. Returns an (n, K) matrix
    and a matching boolean matrix of degenerate-leverage flags.

    ``scale="sum"`` scores with the derivative of the summed PRESS (the
    averaged-PRESS influence times the cluster size), ``"mean"`` with the
    averaged PRESS as is.
    """
    n = data.n
    mags = np.empty((n, len(models)))
    bad = np.zeros((n, len(models)), dtype=bool)
    for k, model in enumerate(models):
        rows = np.flatnonzero(assignments == k + 1)
        ctx = data.subset(rows)
        member = np.full(n, -1)
        member[rows] = np.arange(rows.size)
        mags[:, k], bad[:, k] = _scored(model, ctx, data.x, data.y, member, scale)
    return mags, bad


def objective(models: list[TbplsModel], assignments, data: DataPair, scale: str = "sum") -> float:
    """Within-cluster sum of squared predictive influences."""
    assignments = np.asarray(assignments)
    total = 0.0
    for k, model in enumerate(models):
        rows = np.flatnonzero(assignments == k + 1)
        if rows.size == 0:
            raise DegenerateClusterError(f"cluster {k + 1} is empty")
        ctx = data.subset(rows)
        mags, _ = _scored(model, ctx, ctx.x, ctx.y, np.arange(rows.size), scale)
        total += float(np.sum(mags))
    return total


def _assign(mags: np.ndarray) -> np.ndarray:
    # argmin takes the first minimum, i.e. the lowest cluster id on ties
    return np.argmin(mags, axis=1) + 1


def repair(assignments: np.ndarray, mags: np.ndarray, k: int, min_size: int) -> np.ndarray:
    """Move points into undersized clusters until every cluster has `min_size` members.

    Donors are the points with the highest influence under their current
    cluster, taken only from clusters that can spare them.
    """
    a = assignments.copy()
    n = a.size
    if n < k * min_size:
        raise InvalidInputError(f"cannot fill {k} clusters of size {min_size} from {n} points")
    own = mags[np.arange(n), a - 1]
    for c in range(1, k + 1):
        while np.sum(a == c) < min_size:
            sizes = np.bincount(a, minlength=k + 1)
            donors = np.flatnonzero((a != c) & (sizes[a] > min_size))
            # highest influence first, lowest index on ties
            pick = donors[np.lexsort((donors, -own[donors]))[0]]
            a[pick] = c
            own[pick] = mags[pick, c - 1]
    return a


def p_step(
    models: list[TbplsModel], data: DataPair, assignments: np.ndarray, min_size: int = 3, scale: str = "sum"
) -> np.ndarray:
    """Assign each point to its minimum-influence cluster, then repair undersized clusters."""
    mags, _ = influence_matrix(models, assignments, data, scale)
    new = _assign(mags)
    return repair(new, mags, len(models), min_size)


def e_step(
    assignments: np.ndarray, data: DataPair, r_per_cluster, center: bool = False, r_max: int | None = None
) -> list[TbplsModel]:
    """One TB-PLS fit per cluster.

    With `r_max` set, each cluster's factor count is re-chosen by PRESS over
    1..r_max instead of taken from `r_per_cluster`.
    """
    if r_max is not None:
        from .model_selection import best_rank_model

    models = []
    for k, r in enumerate(r_per_cluster):
        rows = np.flatnonzero(assignments == k + 1)
        if rows.size < 3:
            raise DegenerateClusterError(f"cluster {k + 1} has {rows.size} points; cannot fit")
        sub = data.subset(rows)
        if r_max is not None:
            models.append(best_rank_model(sub, r_max, center))
        else:
            models.append(fit(sub, min(r, sub.p, sub.q, sub.n - 1), center=center))
    return models


def _random_partition(rng: np.random.Generator, n: int, k: int, min_size: int) -> np.ndarray:
    a = rng.integers(1, k + 1, size=n)
    sizes = np.bincount(a, minlength=k + 1)
    if (sizes[1:] < min_size).any():
        # balanced fallback: random permutation of a near-equal split
        a = (np.arange(n) % k) + 1
        rng.shuffle(a)
    return a


def _descend(data: DataPair, cfg: MvppConfig, assignments: np.ndarray) -> MvppState:
    ranks = cfg.ranks
    min_size = cfg.min_size
    models = e_step(assignments, data, ranks, cfg.center_clusters, cfg.r_max_in_loop)
    obj = objective(models, assignments, data, cfg.influence_scale)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        new_assign = p_step(models, data, assignments, min_size, cfg.influence_scale)
        if np.array_equal(new_assign, assignments):
            converged = True
            break
        new_models = e_step(new_assign, data, ranks, cfg.center_clusters, cfg.r_max_in_loop)
        new_obj = objective(new_models, new_assign, data, cfg.influence_scale)
        if new_obj > obj:
            # the refit raised the objective; keep the best state seen and stop
            log.debug("objective rose from %.6g to %.6g; stopping restart", obj, new_obj)
            converged = True
            break
        rel = (obj - new_obj) / obj if obj > 0 else 0.0
        assignments, models, obj = new_assign, new_models, new_obj
        trace.append(obj)
        if rel < cfg.objective_tolerance:
            converged = True
            break
    sizes = np.bincount(assignments, minlength=cfg.k + 1)[1:]
    return MvppState(
        assignments=assignments,
        models=models,
        objective=obj,
        objective_trace=trace,
        converged=converged,
        iterations_used=it,
        degenerate=bool((sizes < min_size).any()),
    )


def restart_seeds(seed: int, restarts: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(restarts)


def run(data: DataPair, config: MvppConfig = MvppConfig(), initial: list[np.ndarray] | None = None) -> MvppState:
    """Best-objective MVPP state over random restarts.

    `initial` optionally supplies extra starting partitions (1-based labels),
    tried before the random ones; each counts as one restart.
    """
    n = data.n
    if n < config.k * config.min_size:
        raise InvalidInputError(
            f"n={n} is too small for k={config.k} clusters of at least {config.min_size} points"
        )
    starts = [np.asarray(a, dtype=int) for a in (initial or [])]
    for ss in restart_seeds(config.seed, max(0, config.restarts - len(starts))):
        starts.append(_random_partition(np.random.default_rng(ss), n, config.k, config.min_size))

    best: MvppState | None = None
    objectives = []
    for idx, start in enumerate(starts):
        if config.k == 1:
            start = np.ones(n, dtype=int)
        else:
            start = repair(start, np.zeros((n, config.k)), config.k, config.min_size)
        state = _descend(data, config, start)
        state.restart_index = idx
        objectives.append(state.objective)
        if best is None or state.objective < best.objective:
            best = state
        if config.k == 1:
            break
    best.restart_objectives = objectives
    return best
