import numpy as np
import pytest

from mvpp.errors import DegenerateClusterError, InvalidInputError
from mvpp.eval import clustering_accuracy
from mvpp.influence import predictive_influence
from mvpp.mvpp import (
    MvppConfig,
    _assign,
    e_step,
    influence_matrix,
    objective,
    p_step,
    repair,
    run,
)
from mvpp.simgen import ScenarioConfig, generate_line_plane, generate_scenario_a, generate_scenario_b
from mvpp.tbpls import DataPair, fit


def small_a(seed, snr=10**0.1):
    ds = generate_scenario_a(ScenarioConfig(n_per_cluster=30, p=40, q=40, snr=snr, seed=seed))
    return ds, DataPair.from_raw(ds.x, ds.y, "none")


def test_config_defaults_and_validation():
    cfg = MvppConfig(k=3)
    assert cfg.ranks == (1, 1, 1)
    assert cfg.min_size == 3
    assert MvppConfig(k=2, r_per_cluster=(1, 3)).min_size == 5
    for bad in (dict(k=0), dict(restarts=0), dict(min_cluster_size=2), dict(k=2, r_per_cluster=(1,))):
        with pytest.raises(InvalidInputError):
            MvppConfig(**bad)


def test_single_cluster_objective_is_plain_influence_sum():
    ds, data = small_a(0)
    a = np.ones(data.n, dtype=int)
    model = fit(data, 1)
    direct = predictive_influence(model, data).squared_magnitudes.sum()
    np.testing.assert_allclose(objective([model], a, data, scale="mean"), direct, rtol=1e-12)
    np.testing.assert_allclose(objective([model], a, data, scale="sum"), data.n**2 * direct, rtol=1e-12)


def test_noiseless_truth_beats_wrong_partition():
    rng = np.random.default_rng(1)
    xs, ys = [], []
    for _ in range(2):
        t = rng.standard_normal(30) + 2.0
        xs.append(np.outer(t, rng.standard_normal(8)))
        ys.append(np.outer(1.5 * t, rng.standard_normal(6)))
    data = DataPair(np.vstack(xs), np.vstack(ys))
    truth = np.repeat([1, 2], 30)
    wrong = truth.copy()
    wrong[:10] = 2
    wrong[-10:] = 1
    obj_true = objective(e_step(truth, data, (1, 1)), truth, data)
    obj_wrong = objective(e_step(wrong, data, (1, 1)), wrong, data)
    assert obj_true < 1e-8 * obj_wrong


def test_objective_label_and_row_permutation_invariant():
    ds, data = small_a(2)
    a = ds.true_labels
    base = objective(e_step(a, data, (1, 1)), a, data)
    swapped = 3 - a
    np.testing.assert_allclose(objective(e_step(swapped, data, (1, 1)), swapped, data), base, rtol=1e-12)
    perm = np.random.default_rng(0).permutation(data.n)
    pdata = data.subset(perm)
    np.testing.assert_allclose(objective(e_step(a[perm], pdata, (1, 1)), a[perm], pdata), base, rtol=1e-10)


def test_empty_cluster_objective_raises():
    ds, data = small_a(0)
    models = e_step(ds.true_labels, data, (1, 1))
    with pytest.raises(DegenerateClusterError):
        objective(models, np.ones(data.n, dtype=int), data)


def test_assignment_ties_go_to_lowest_id():
    np.testing.assert_array_equal(_assign(np.array([[0.2, 0.2], [0.3, 0.1]])), [1, 2])


def test_repair_fills_small_clusters():
    a = np.array([1] * 9 + [2])
    mags = np.zeros((10, 2))
    mags[:, 0] = np.arange(10)
    out = repair(a, mags, 2, 3)
    assert np.bincount(out)[2] == 3
    # highest-influence donors from cluster 1 move first
    assert out[8] == 2 and out[7] == 2
    with pytest.raises(InvalidInputError):
        repair(a, mags, 4, 3)


def test_one_step_from_true_models_scenario_b():
    accs = []
    for seed in range(10):
        ds = generate_scenario_b(ScenarioConfig(n_per_cluster=48, seed=seed))
        data = DataPair.from_raw(ds.x, ds.y, "none")
        t = ds.true_labels
        accs.append(clustering_accuracy(p_step(e_step(t, data, (1, 1)), data, t), t).accuracy)
    assert np.mean(accs) >= 0.9


def test_e_step_locality():
    ds, data = small_a(3)
    a = ds.true_labels.copy()
    three = np.where(np.arange(data.n) % 3 == 0, 3, a)
    m1 = e_step(three, data, (1, 1, 1))
    moved = three.copy()
    i = np.flatnonzero(three == 1)[0]
    moved[i] = 2
    m2 = e_step(moved, data, (1, 1, 1))
    np.testing.assert_array_equal(m1[2].beta, m2[2].beta)
    assert not np.array_equal(m1[0].beta, m2[0].beta)


def test_influence_matrix_members_match_within_cluster_influence():
    ds, data = small_a(4)
    a = ds.true_labels
    models = e_step(a, data, (1, 1))
    mags, _ = influence_matrix(models, a, data, scale="mean")
    rows = np.flatnonzero(a == 1)
    direct = predictive_influence(models[0], data.subset(rows)).squared_magnitudes
    np.testing.assert_allclose(mags[rows, 0], direct, rtol=1e-12)


def test_run_single_cluster():
    ds, data = small_a(0)
    state = run(data, MvppConfig(k=1))
    assert np.all(state.assignments == 1)
    np.testing.assert_allclose(state.models[0].beta, fit(data, 1).beta)


def test_run_recovers_geometric_clusters():
    ds, data = small_a(5, snr=10.0)
    state = run(data, MvppConfig(k=2, restarts=5, seed=5))
    assert clustering_accuracy(state.assignments, ds.true_labels).accuracy >= 0.9


@pytest.mark.parametrize("seed", range(4))
def test_run_trace_non_increasing(seed):
    ds, data = small_a(seed)
    state = run(data, MvppConfig(k=2, restarts=3, seed=seed))
    assert np.all(np.diff(state.objective_trace) <= 0)
    np.testing.assert_allclose(state.objective, objective(state.models, state.assignments, data), rtol=1e-10)
    assert len(state.restart_objectives) == 3
    assert state.objective == min(state.restart_objectives)


def test_run_deterministic():
    ds, data = small_a(6)
    a = run(data, MvppConfig(k=2, restarts=3, seed=9))
    b = run(data, MvppConfig(k=2, restarts=3, seed=9))
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.objective_trace == b.objective_trace


def test_fixed_point():
    ds, data = small_a(7)
    first = run(data, MvppConfig(k=2, restarts=3, seed=1))
    again = run(data, MvppConfig(k=2, restarts=1, seed=1), initial=[first.assignments])
    assert again.iterations_used <= 1
    np.testing.assert_array_equal(again.assignments, first.assignments)


def test_infeasible_partition():
    ds, data = small_a(0)
    with pytest.raises(InvalidInputError):
        run(data.subset(np.arange(8)), MvppConfig(k=3))


def test_line_plane_with_rank_selection_in_loop():
    ds = generate_line_plane(seed=3, n_per_cluster=40)
    data = DataPair.from_raw(ds.x, ds.y, "none")
    state = run(data, MvppConfig(k=2, restarts=3, seed=3, r_max_in_loop=2))
    assert clustering_accuracy(state.assignments, ds.true_labels).accuracy >= 0.9
    assert sorted(m.r for m in state.models) == [1, 2]
