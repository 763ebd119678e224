"""Choosing the number of clusters K and the per-cluster factor counts R_k
by leave-one-out prediction error."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .mvpp import MvppConfig, MvppState, run
from .press import fixed_weights_loo_press, press_for
from .tbpls import DataPair, TbplsModel, fit

log = logging.getLogger(__name__)

# relative gap under which two PRESS values count as a tie
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SelectionCurve:
    parameter_values: list[int]
    mean_press: list[float]
    objective_values: list[float] = field(default_factory=list)
    std_press: list[float] = field(default_factory=list)
    chosen: int = 1
    skipped: list[int] = field(default_factory=list)
    states: list[MvppState] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if len(self.parameter_values) != len(self.mean_press):
            raise InvalidInputError("parameter_values and mean_press differ in length")


def argmin_with_ties(values, params, atol: float = 0.0) -> int:
    """Parameter at the smallest value; near-ties go to the smallest parameter.

    Values within ``TIE_RTOL`` of the largest value, or within `atol`, of
    the minimum count as ties.
    """
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values)))
    best = values.min()
    ok = values <= best + max(TIE_RTOL * scale, atol)
    return int(min(p for p, good in zip(params, ok) if good))


def _press_floor(data: DataPair) -> float:
    # PRESS differences below rounding of the response scale are ties
    return 1e-12 * float(np.mean(np.sum(data.y**2, axis=1)))


def partition_press(state: MvppState, data: DataPair) -> tuple[float, float]:
    """Size-weighted mean and spread of the per-cluster PRESS of a partition."""
    js, sizes = [], []
    for k, model in enumerate(state.models):
        rows = np.flatnonzero(state.assignments == k + 1)
        js.append(press_for(model, data.subset(rows)).press_value)
        sizes.append(rows.size)
    js = np.array(js)
    sizes = np.array(sizes, dtype=float)
    mean = float(np.sum(sizes * js) / sizes.sum())
    return mean, float(np.sqrt(np.sum(sizes * (js - mean) ** 2) / sizes.sum()))


def split_largest(assignments: np.ndarray, rng: np.random.Generator, min_size: int) -> np.ndarray:
    """Give the largest cluster's members a new label K+1 with probability 1/2 each."""
    a = np.asarray(assignments).copy()
    k = int(a.max())
    sizes = np.bincount(a, minlength=k + 1)[1:]
    big = int(np.argmax(sizes)) + 1
    rows = np.flatnonzero(a == big)
    if rows.size < 2 * min_size:
        raise InvalidInputError("largest cluster too small to split")
    flip = rng.permutation(rows)
    # random half, but never below the minimum size on either side
    cut = int(np.clip(rng.binomial(rows.size, 0.5), min_size, rows.size - min_size))
    a[flip[:cut]] = k + 1
    return a


def select_k(data: DataPair, k_max: int, base_config: MvppConfig = MvppConfig()) -> SelectionCurve:
    """Run MVPP for K = 1..k_max and pick the K with the lowest size-weighted PRESS.

    Every K > 1 gets one extra starting partition: the best (K-1)-partition
    with its largest cluster split at random.
    """
    if k_max < 2:
        raise InvalidInputError("k_max must be >= 2")
    params, press, stds, objs, states, skipped = [], [], [], [], [], []
    previous: MvppState | None = None
    rng = np.random.default_rng(np.random.SeedSequence(base_config.seed).spawn(1)[0])
    for k in range(1, k_max + 1):
        ranks = None if base_config.r_per_cluster is None else (base_config.r_per_cluster[0],) * k
        cfg = replace(base_config, k=k, r_per_cluster=ranks)
        if data.n < k * cfg.min_size:
            log.warning("K=%d skipped: %d points cannot fill %d clusters of %d", k, data.n, k, cfg.min_size)
            skipped.append(k)
            continue
        initial = None
        if previous is not None and k > 1:
            try:
                initial = [split_largest(previous.assignments, rng, cfg.min_size)]
            except InvalidInputError:
                initial = None
        state = run(data, cfg, initial=initial)
        mean, std = partition_press(state, data)
        params.append(k)
        press.append(mean)
        stds.append(std)
        objs.append(state.objective)
        states.append(state)
        previous = state
    if not params:
        raise InvalidInputError("no feasible K")
    chosen = argmin_with_ties(press, params, _press_floor(data))
    return SelectionCurve(params, press, objs, stds, chosen, skipped, states)


def select_r(data_subset: DataPair, r_max: int, center: bool = False) -> SelectionCurve:
    """Factor count with the lowest fixed-weights leave-one-out PRESS (ties to the smaller R)."""
    d = data_subset
    if r_max < 1:
        raise InvalidInputError("r_max must be >= 1")
    if r_max > min(d.p, d.q, d.n - 2):
        raise InvalidInputError(f"r_max={r_max} exceeds min(p, q, n-2)={min(d.p, d.q, d.n - 2)}")
    params, press, skipped = [], [], []
    for r in range(1, r_max + 1):
        model = fit(d, r, center=center)
        if model.rank_reduced:
            skipped.extend(range(r, r_max + 1))
            log.info("X'Y has rank %d; candidates R >= %d dropped", model.r, r)
            break
        params.append(r)
        press.append(fixed_weights_loo_press(model, d).press_value)
    return SelectionCurve(params, press, chosen=argmin_with_ties(press, params, _press_floor(d)), skipped=skipped)


def best_rank_model(data_subset: DataPair, r_max: int, center: bool = False) -> TbplsModel:
    """Fit at the R chosen by `select_r`, capped to what the subset supports."""
    cap = min(r_max, data_subset.p, data_subset.q, data_subset.n - 2)
    if cap < 1:
        raise InvalidInputError("cluster too small for any factor")
    return fit(data_subset, select_r(data_subset, cap, center).chosen, center=center)


def select_cluster_ranks(state: MvppState, data: DataPair, r_max: int, center: bool = False) -> list[SelectionCurve]:
    """Per-cluster R selection on a converged partition."""
    curves = []
    for k in range(state.k):
        sub = data.subset(np.flatnonzero(state.assignments == k + 1))
        cap = min(r_max, sub.p, sub.q, sub.n - 2)
        curves.append(select_r(sub, cap, center))
    return curves
