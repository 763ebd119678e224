"""Leave-one-out prediction error (PRESS) for OLS and for TB-PLS.

The TB-PLS closed form keeps the weight vectors u, v fixed at their
full-data values and updates the inner slope g and the Y loading q for
each deleted row with rank-one downdates. With the weights frozen the
downdates are exact, so `closed_form_press` and `fixed_weights_loo_press`
agree to rounding error for one-factor models.

Leverages are normalised, ``t_i^2 / t't`` and ``s_i^2 / s's``; the
unnormalised ``t_i^2`` only coincides with this when the score vectors
have unit norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLeverageError, InvalidInputError, UnsupportedConfigurationError
from .tbpls import DataPair, TbplsModel

EPS_LEV = 1e-8


@dataclass(frozen=True)
class PressReport:
    loo_errors: np.ndarray
    press_value: float
    leverages_t: np.ndarray
    leverages_s: np.ndarray
    clamped_points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n(self) -> int:
        return self.loo_errors.shape[0]


def ols_press_residual(e_i, leverage: float) -> np.ndarray:
    """OLS leave-one-out residual ``e_i / (1 - G_ii)``."""
    if not 0.0 <= leverage < 1.0:
        raise DegenerateLeverageError(f"leverage {leverage} outside [0, 1)")
    return np.asarray(e_i, dtype=float) / (1.0 - leverage)


def ols_hat_diagonal(x) -> np.ndarray:
    """Diagonal of the hat matrix X (X'X)^-1 X', computed through a thin QR."""
    qmat, _ = np.linalg.qr(np.asarray(x, dtype=float))
    return np.sum(qmat**2, axis=1)


def loo_inner_coefficient(g: float, t, s, i: int) -> float:
    """Inner slope with row `i` removed, from the full-data slope `g`."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    tt = t @ t
    lev = t[i] ** 2 / tt
    if lev >= 1.0 - EPS_LEV:
        raise DegenerateLeverageError(f"row {i} carries all of t't (leverage {lev})")
    return float(g - (s[i] - t[i] * g) * t[i] / tt / (1.0 - lev))


def loo_loading(q, y, s, i: int) -> np.ndarray:
    """Y loading with row `i` removed, from the full-data loading `q`."""
    s = np.asarray(s, dtype=float)
    ss = s @ s
    lev = s[i] ** 2 / ss
    if lev >= 1.0 - EPS_LEV:
        raise DegenerateLeverageError(f"row {i} carries all of s's (leverage {lev})")
    return np.asarray(q) - (np.asarray(y)[i] - s[i] * np.asarray(q)) * s[i] / ss / (1.0 - lev)


def _clamp(lev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bad = lev >= 1.0 - EPS_LEV
    return np.where(bad, 1.0 - EPS_LEV, lev), bad


def frozen_press(x, y, u, v, g: float, q) -> PressReport:
    """Closed-form one-factor PRESS with all model parameters held fixed.

    As a function of the data this is what the predictive influence
    differentiates; at the fitted parameters it equals the exact
    frozen-weight leave-one-out error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.ravel(u)
    v = np.ravel(v)
    q = np.ravel(q)
    t = x @ u
    s = y @ v
    tt = t @ t
    ss = s @ s
    e = y - np.outer(t, g * q)  # y - x beta
    e_outer = y - np.outer(s, q)
    h = s - g * t
    lev_t, bad_t = _clamp(t**2 / tt)
    lev_s, bad_s = _clamp(s**2 / ss)
    num = e - lev_t[:, None] * e_outer - (h * s / ss)[:, None] * y
    den = (1.0 - lev_t) * (1.0 - lev_s)
    loo = num / den[:, None]
    return PressReport(
        loo_errors=loo,
        press_value=float(np.mean(np.sum(loo**2, axis=1))),
        leverages_t=lev_t,
        leverages_s=lev_s,
        clamped_points=np.flatnonzero(bad_t | bad_s),
    )


def closed_form_press(model: TbplsModel, data: DataPair) -> PressReport:
    if model.r != 1:
        raise UnsupportedConfigurationError(
            f"closed-form PRESS is defined for one latent factor (model has {model.r}); "
            "use fixed_weights_loo_press"
        )
    f = model.factors[0]
    x, y = model.center(data.x, data.y)
    return frozen_press(x, y, f.u, f.v, f.g, f.q_loading)


def fixed_weights_loo_press(model: TbplsModel, data: DataPair) -> PressReport:
    """Leave-one-out error with every weight pair frozen and g, q refitted.

    For each deleted row the inner slopes and Y loadings are the ordinary
    least-squares estimates over the remaining n-1 rows.
    """
    x, y = model.center(data.x, data.y)
    return fixed_weights_press(x, y, model.u, model.v)


def fixed_weights_press(x, y, u, v) -> PressReport:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n - 1 < 2:
        raise InvalidInputError("need at least 3 rows for a leave-one-out refit")
    u = np.asarray(u, dtype=float).reshape(x.shape[1], -1)
    v = np.asarray(v, dtype=float).reshape(y.shape[1], -1)
    t = x @ u  # n x R
    s = y @ v
    pred = np.zeros_like(y)
    bad = np.zeros(n, dtype=bool)
    for r in range(t.shape[1]):
        tr, sr = t[:, r], s[:, r]
        # sums over the n-1 retained rows
        tt = tr @ tr - tr**2
        ts = tr @ sr - tr * sr
        ss = sr @ sr - sr**2
        ys = (y.T @ sr)[None, :] - y * sr[:, None]
        bad_r = (tt <= EPS_LEV * (tr @ tr)) | (ss <= EPS_LEV * (sr @ sr))
        bad |= bad_r
        tt = np.where(bad_r, EPS_LEV * (tr @ tr), tt)
        ss = np.where(bad_r, EPS_LEV * (sr @ sr), ss)
        g_loo = ts / tt
        q_loo = ys / ss[:, None]
        pred += (tr * g_loo)[:, None] * q_loo
    loo = y - pred
    t1, s1 = t[:, 0], s[:, 0]
    return PressReport(
        loo_errors=loo,
        press_value=float(np.mean(np.sum(loo**2, axis=1))),
        leverages_t=np.minimum(t1**2 / (t1 @ t1), 1.0 - EPS_LEV),
        leverages_s=np.minimum(s1**2 / (s1 @ s1), 1.0 - EPS_LEV),
        clamped_points=np.flatnonzero(bad),
    )


def press_for(model: TbplsModel, data: DataPair) -> PressReport:
    """Closed form for one factor, frozen-weight refits otherwise."""
    if model.r == 1:
        return closed_form_press(model, data)
    return fixed_weights_loo_press(model, data)
