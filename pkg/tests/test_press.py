import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpp.errors import DegenerateLeverageError, UnsupportedConfigurationError
from mvpp.press import (
    closed_form_press,
    fixed_weights_loo_press,
    loo_inner_coefficient,
    loo_loading,
    ols_hat_diagonal,
    ols_press_residual,
    press_for,
)
from mvpp.tbpls import DataPair, fit, loo_prediction_error

from conftest import latent_pair


def test_ols_press_identity():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 3))
    y = rng.standard_normal(10)
    coef = np.linalg.lstsq(x, y, rcond=None)[0]
    lev = ols_hat_diagonal(x)
    for i in range(10):
        keep = np.arange(10) != i
        c = np.linalg.lstsq(x[keep], y[keep], rcond=None)[0]
        direct = y[i] - x[i] @ c
        assert abs(ols_press_residual(y[i] - x[i] @ coef, lev[i]) - direct) < 1e-10


def test_ols_leverage_out_of_range():
    with pytest.raises(DegenerateLeverageError):
        ols_press_residual(1.0, 1.0)


def test_inner_coefficient_two_points():
    t = np.array([1.0, -1.0])
    s = np.array([1.0, 1.0])
    g = (t @ s) / (t @ t)
    assert g == 0.0
    assert loo_inner_coefficient(g, t, s, 0) == pytest.approx(-1.0)


def test_recursions_match_direct_deletion():
    rng = np.random.default_rng(1)
    t, s = rng.standard_normal(50), rng.standard_normal(50)
    y = rng.standard_normal((50, 4))
    g = (t @ s) / (t @ t)
    q = y.T @ s / (s @ s)
    worst_g = worst_q = 0.0
    for i in range(50):
        keep = np.arange(50) != i
        g_direct = (t[keep] @ s[keep]) / (t[keep] @ t[keep])
        q_direct = y[keep].T @ s[keep] / (s[keep] @ s[keep])
        worst_g = max(worst_g, abs(loo_inner_coefficient(g, t, s, i) - g_direct))
        worst_q = max(worst_q, np.abs(loo_loading(q, y, s, i) - q_direct).max())
    assert worst_g < 1e-12 and worst_q < 1e-12


def test_recursion_single_point_carries_everything():
    t = np.array([0.0, 0.0, 2.0])
    with pytest.raises(DegenerateLeverageError):
        loo_inner_coefficient(1.0, t, np.ones(3), 2)


def test_closed_form_matches_fixed_weights(pair30):
    m = fit(pair30, 1)
    a = closed_form_press(m, pair30)
    b = fixed_weights_loo_press(m, pair30)
    assert abs(a.press_value - b.press_value) / b.press_value < 1e-8
    np.testing.assert_allclose(a.loo_errors, b.loo_errors, rtol=1e-8, atol=1e-10)


def test_fixed_weights_against_explicit_refit(pair30):
    m = fit(pair30, 2)
    rep = fixed_weights_loo_press(m, pair30)
    i = 4
    keep = np.arange(pair30.n) != i
    x, y = pair30.x[keep], pair30.y[keep]
    pred = np.zeros(pair30.q)
    for f in m.factors:
        t, s = x @ f.u, y @ f.v
        g = (t @ s) / (t @ t)
        q = y.T @ s / (s @ s)
        pred += (pair30.x[i] @ f.u) * g * q
    np.testing.assert_allclose(rep.loo_errors[i], pair30.y[i] - pred, atol=1e-12)


def test_closed_form_close_to_full_refit(pair30):
    j = closed_form_press(fit(pair30, 1), pair30).press_value
    _, full = loo_prediction_error(pair30, 1, "center_and_scale")
    assert abs(j - full) / full < 0.10


def test_press_value_is_mean_row_norm(pair30):
    rep = closed_form_press(fit(pair30, 1), pair30)
    np.testing.assert_allclose(rep.press_value, np.mean(np.sum(rep.loo_errors**2, axis=1)), rtol=1e-12)


def test_duplicated_rows_lower_press():
    data = latent_pair(2, n=20, p=5, q=5)
    dup = DataPair(np.repeat(data.x, 2, axis=0), np.repeat(data.y, 2, axis=0))
    assert closed_form_press(fit(dup, 1), dup).press_value < closed_form_press(fit(data, 1), data).press_value


def test_multi_factor_needs_fixed_weights(pair30):
    m = fit(pair30, 2)
    with pytest.raises(UnsupportedConfigurationError):
        closed_form_press(m, pair30)
    assert press_for(m, pair30).press_value == fixed_weights_loo_press(m, pair30).press_value


def test_leverages_normalised(pair30):
    rep = closed_form_press(fit(pair30, 1), pair30)
    np.testing.assert_allclose(rep.leverages_t.sum(), 1.0)
    np.testing.assert_allclose(rep.leverages_s.sum(), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(8, 40))
def test_press_dominates_training_error(seed, n):
    data = latent_pair(seed, n=n, p=4, q=3)
    m = fit(data, 1)
    rep = closed_form_press(m, data)
    if rep.clamped_points.size == 0:
        e = data.y - data.x @ m.beta
        assert rep.press_value >= np.mean(np.sum(e**2, axis=1)) - 1e-12
