import numpy as np
import pytest

from mvpp.errors import InvalidInputError
from mvpp.model_selection import argmin_with_ties, select_cluster_ranks, select_k, select_r, split_largest
from mvpp.mvpp import MvppConfig, run
from mvpp.simgen import ScenarioConfig, generate_scenario_a
from mvpp.tbpls import DataPair


def rank_two_noiseless(seed, n=30, p=6, q=5):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((n, 2))
    a = np.linalg.qr(rng.standard_normal((p, 2)))[0]
    b = np.linalg.qr(rng.standard_normal((q, 2)))[0]
    return DataPair(t @ a.T, t @ np.diag([2.0, 1.0]) @ b.T)


def test_argmin_ties_to_smallest():
    assert argmin_with_ties([3.0, 1.0, 1.0], [1, 2, 3]) == 2
    assert argmin_with_ties([1e-30, 2e-31], [1, 2], atol=1e-20) == 1
    assert argmin_with_ties([2.0, 1.0], [1, 2]) == 2


def test_argmin_scale_invariant():
    vals = [4.0, 2.5, 3.0]
    assert argmin_with_ties(vals, [1, 2, 3]) == argmin_with_ties(np.array(vals) * 17.0, [1, 2, 3])


@pytest.mark.parametrize("seed", range(5))
def test_select_r_exact_rank_two(seed):
    curve = select_r(rank_two_noiseless(seed), 4)
    assert curve.chosen == 2


def test_select_r_rank_deficiency_truncates():
    curve = select_r(rank_two_noiseless(0), 4)
    assert curve.parameter_values == [1, 2]
    assert curve.skipped == [3, 4]


def test_select_r_single_candidate():
    data = rank_two_noiseless(1)
    assert select_r(data, 1).chosen == 1


def test_select_r_too_large():
    with pytest.raises(InvalidInputError):
        select_r(rank_two_noiseless(0, n=5, p=6, q=6), 4)


def test_split_largest_respects_min_size():
    a = np.array([1] * 12 + [2] * 4)
    out = split_largest(a, np.random.default_rng(0), 3)
    sizes = np.bincount(out)[1:]
    assert sizes.size == 3 and sizes.min() >= 3 and sizes[1] == 4


def _small(seed, **kw):
    ds = generate_scenario_a(ScenarioConfig(n_per_cluster=25, p=30, q=30, seed=seed, **kw))
    return ds, DataPair.from_raw(ds.x, ds.y, "none")


def test_select_k_curve_shape():
    ds, data = _small(0)
    curve = select_k(data, 3, MvppConfig(k=2, restarts=2, seed=0))
    assert curve.parameter_values == [1, 2, 3]
    assert len(curve.mean_press) == len(curve.objective_values) == len(curve.std_press) == 3
    assert np.all(np.isfinite(curve.mean_press)) and min(curve.mean_press) >= 0
    assert curve.chosen in (1, 2, 3)


def test_select_k_noiseless_homogeneous_prefers_one():
    rng = np.random.default_rng(3)
    t = rng.standard_normal(30)
    data = DataPair(np.outer(t, rng.standard_normal(5)), np.outer(t, rng.standard_normal(4)))
    assert select_k(data, 3, MvppConfig(k=1, restarts=2, seed=3)).chosen == 1


def test_select_k_boundary_feasibility():
    ds, data = _small(1)
    sub = data.subset(np.arange(6))
    curve = select_k(sub, 2, MvppConfig(k=1, restarts=1))
    assert curve.parameter_values == [1, 2]


def test_select_k_skips_infeasible():
    ds, data = _small(2)
    sub = data.subset(np.arange(7))
    curve = select_k(sub, 3, MvppConfig(k=1, restarts=1))
    assert curve.skipped == [3]


def test_select_k_validation():
    ds, data = _small(0)
    with pytest.raises(InvalidInputError):
        select_k(data, 1)


def test_cluster_ranks_noisy_scenario_prefer_one():
    ds, data = _small(4, snr=10**-0.5)
    state = run(data, MvppConfig(k=2, restarts=2, seed=4))
    curves = select_cluster_ranks(state, data, 3)
    assert [c.chosen for c in curves].count(1) >= 1
