"""Predictive influence: the gradient of the frozen-parameter PRESS with
respect to one observation's coordinates in both views.

With u, v, g and q held fixed, the leave-one-out residual of row i can be
written as ``r_i = y_i - t_i a_i c_i`` where

    a_i = g - t_i h_i / A_i,     c_i = q - s_i (y_i - s_i q) / B_i,

``h_i = s_i - g t_i`` and ``A_i``, ``B_i`` are the sums of squared t and s
scores over the *other* rows. Moving x_i changes t_i directly and, through
t't, every other row's residual; the gradient below carries both parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnsupportedConfigurationError
from .press import EPS_LEV, fixed_weights_press, frozen_press
from .tbpls import DataPair, TbplsModel


@dataclass(frozen=True)
class InfluenceSet:
    vectors: np.ndarray  # n x (p + q), row i = [dJ/dx_i, dJ/dy_i]
    squared_magnitudes: np.ndarray
    model_id: int = 0
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n(self) -> int:
        return self.squared_magnitudes.size


def _cross_derivatives(T, S, t, s, yq, yy, qq, g):
    """d f_j / dT and d f_j / dS for every context row j.

    ``f_j = ||r_j||^2``; T and S are the total squared score norms and may be
    arrays (one value per query point) broadcasting against the row arrays.
    Everything is expressed through the scalars y_j.q, y_j.y_j and q.q so
    no q-length vectors are formed.
    """
    A = np.maximum(T - t**2, EPS_LEV * T)
    B = np.maximum(S - s**2, EPS_LEV * S)
    h = s - g * t
    a = (g * T - t * s) / A
    yc = (S * yq - s * yy) / B
    cq = (S * qq - s * yq) / B
    cc = (S**2 * qq - 2.0 * S * s * yq + s**2 * yy) / B**2
    rc = yc - t * a * cc
    rE = (yy - s * yq) - t * a * (yc - s * cq)
    dT = -2.0 * t * rc * t * h / A**2
    dS = -2.0 * t * a * rE * s / B**2
    return dT, dS


def frozen_influence(ctx_x, ctx_y, u, v, g: float, q, pts_x=None, pts_y=None, member=None):
    """Analytic one-factor influence of query points under a frozen model.

    Parameters
    ----------
    ctx_x, ctx_y : the rows the PRESS is taken over (a model's training set).
    u, v, g, q : frozen model parameters.
    pts_x, pts_y : query points; default to the context rows themselves.
    member : for each query point, its row index in the context, or -1 when
        the point is outside it. An outside point is scored as an extra
        (n+1)-th row appended to the context.

    Returns
    -------
    grad_x_coef : (m,) the x-gradient is ``grad_x_coef[:, None] * u``.
    grad_y : (m, q) y-gradients.
    degenerate : (m,) bool, rows whose own leverage had to be clamped.
    """
    ctx_x = np.asarray(ctx_x, dtype=float)
    ctx_y = np.asarray(ctx_y, dtype=float)
    u = np.ravel(u)
    v = np.ravel(v)
    q = np.ravel(q)
    n_ctx = ctx_x.shape[0]
    if pts_x is None:
        pts_x, pts_y = ctx_x, ctx_y
        member = np.arange(n_ctx)
    pts_x = np.atleast_2d(np.asarray(pts_x, dtype=float))
    pts_y = np.atleast_2d(np.asarray(pts_y, dtype=float))
    m = pts_x.shape[0]
    member = np.full(m, -1) if member is None else np.asarray(member)
    inside = member >= 0

    t_ctx = ctx_x @ u
    s_ctx = ctx_y @ v
    yq_ctx = ctx_y @ q
    yy_ctx = np.einsum("ij,ij->i", ctx_y, ctx_y)
    qq = q @ q
    T0 = t_ctx @ t_ctx
    S0 = s_ctx @ s_ctx

    t = pts_x @ u
    s = pts_y @ v
    # totals over the set the point's PRESS is computed on
    T = np.where(inside, T0, T0 + t**2)
    S = np.where(inside, S0, S0 + s**2)
    N = np.where(inside, n_ctx, n_ctx + 1).astype(float)

    A = T - t**2
    B = S - s**2
    bad = (A <= EPS_LEV * T) | (B <= EPS_LEV * S)
    A = np.maximum(A, EPS_LEV * T)
    B = np.maximum(B, EPS_LEV * S)

    # own residual term
    h = s - g * t
    a = g - t * h / A
    E = pts_y - s[:, None] * q
    c = q - (s / B)[:, None] * E
    r = pts_y - (t * a)[:, None] * c
    da_dt = -(s - 2.0 * g * t) / A
    rc = np.einsum("ij,ij->i", r, c)
    own_x = -2.0 * rc * (a + t * da_dt)
    y2s = np.einsum("ij,ij->i", pts_y - 2.0 * s[:, None] * q, r)
    own_y = 2.0 * (
        r
        + (t**2 * rc / A)[:, None] * v
        + (t * a / B)[:, None] * (y2s[:, None] * v + s[:, None] * r)
    )

    # dependence of every other row on t't and s's
    cross_T = np.empty(m)
    cross_S = np.empty(m)
    if inside.any():
        dT, dS = _cross_derivatives(T0, S0, t_ctx, s_ctx, yq_ctx, yy_ctx, qq, g)
        idx = member[inside]
        cross_T[inside] = dT.sum() - dT[idx]
        cross_S[inside] = dS.sum() - dS[idx]
    if (~inside).any():
        dT, dS = _cross_derivatives(
            T[~inside, None], S[~inside, None], t_ctx, s_ctx, yq_ctx, yy_ctx, qq, g
        )
        cross_T[~inside] = dT.sum(axis=1)
        cross_S[~inside] = dS.sum(axis=1)

    grad_x_coef = (own_x + 2.0 * t * cross_T) / N
    grad_y = (own_y + (2.0 * s * cross_S)[:, None] * v) / N[:, None]
    return grad_x_coef, grad_y, bad


def _finalize(vectors: np.ndarray, bad: np.ndarray, model_id: int) -> InfluenceSet:
    mags = np.einsum("ij,ij->i", vectors, vectors)
    if bad.any():
        good = ~bad & np.isfinite(mags)
        top = mags[good].max() if good.any() else 1.0
        target = 10.0 * top if top > 0 else 1.0
        vectors = vectors.copy()
        for i in np.flatnonzero(bad):
            norm = np.sqrt(mags[i])
            if np.isfinite(norm) and norm > 0:
                vectors[i] *= np.sqrt(target) / norm
            else:
                vectors[i] = 0.0
                vectors[i, 0] = np.sqrt(target)
        mags = np.einsum("ij,ij->i", vectors, vectors)
    return InfluenceSet(vectors, mags, model_id, np.flatnonzero(bad))


def predictive_influence(model: TbplsModel, data: DataPair) -> InfluenceSet:
    """Influence of every training row under a fitted one-factor model."""
    if model.r != 1:
        raise UnsupportedConfigurationError(
            "analytic influence needs a one-factor model; use finite_difference_influence"
        )
    if data.p != model.p or data.q != model.q:
        raise InvalidInputError("data dimensions do not match the model")
    f = model.factors[0]
    x, y = model.center(data.x, data.y)
    gx, gy, bad = frozen_influence(x, y, f.u, f.v, f.g, f.q_loading)
    vectors = np.hstack([gx[:, None] * f.u[None, :], gy])
    return _finalize(vectors, bad, model.id)


def finite_difference_influence(press_fn, x, y, rows=None, step: float = 1e-5) -> np.ndarray:
    """Central differences of ``press_fn(x, y)`` with respect to each listed row.

    ``press_fn`` returns a scalar PRESS. Returns an (len(rows), p + q) array.
    """
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    n, p = x.shape
    rows = range(n) if rows is None else rows
    out = []
    for i in rows:
        grad = np.empty(p + y.shape[1])
        for j in range(p + y.shape[1]):
            mat, col = (x, j) if j < p else (y, j - p)
            orig = mat[i, col]
            hstep = step * max(1.0, abs(orig))
            mat[i, col] = orig + hstep
            up = press_fn(x, y)
            mat[i, col] = orig - hstep
            down = press_fn(x, y)
            mat[i, col] = orig
            grad[j] = (up - down) / (2.0 * hstep)
        out.append(grad)
    return np.array(out)


def frozen_press_value(u, v, g, q):
    """Scalar PRESS as a function of the data, for finite-difference checks."""
    return lambda x, y: frozen_press(x, y, u, v, g, q).press_value


def multi_factor_influence(model: TbplsModel, data: DataPair, step: float = 1e-5) -> InfluenceSet:
    """Influence for R > 1 by central differences of the frozen-weight PRESS.

    Costs 2(p+q) PRESS evaluations per row; intended for small problems.
    """
    u, v = model.u, model.v
    x, y = model.center(data.x, data.y)
    vectors = finite_difference_influence(
        lambda x, y: fixed_weights_press(x, y, u, v).press_value, x, y, step=step
    )
    bad = np.zeros(data.n, dtype=bool)
    bad[fixed_weights_press(x, y, u, v).clamped_points] = True
    return _finalize(vectors, bad, model.id)


def influence_magnitudes(model: TbplsModel, ctx: DataPair, pts_x, pts_y, member) -> tuple[np.ndarray, np.ndarray]:
    """Squared influence of query points under `model`, whose training rows are `ctx`.

    Returns ``(squared_magnitudes, degenerate_flags)``.
    """
    member = np.asarray(member)
    cx, cy = model.center(ctx.x, ctx.y)
    px, py = model.center(np.atleast_2d(pts_x), np.atleast_2d(pts_y))
    if model.r == 1:
        f = model.factors[0]
        gx, gy, bad = frozen_influence(cx, cy, f.u, f.v, f.g, f.q_loading, px, py, member)
        mags = gx**2 + np.einsum("ij,ij->i", gy, gy)
    else:
        mags, bad = _multi_factor_magnitudes(model, cx, cy, px, py, member)
    if bad.any():
        good = ~bad & np.isfinite(mags)
        top = mags[good].max() if good.any() else 1.0
        mags = np.where(bad, 10.0 * top if top > 0 else 1.0, mags)
    return mags, bad


def _multi_factor_magnitudes(model, ctx_x, ctx_y, pts_x, pts_y, member):
    u, v = model.u, model.v
    n_ctx = ctx_x.shape[0]
    mags = np.empty(pts_x.shape[0])
    bad = np.zeros(pts_x.shape[0], dtype=bool)
    for k in range(pts_x.shape[0]):
        if member[k] >= 0:
            x_aug, y_aug, row = ctx_x, ctx_y, int(member[k])
        else:
            x_aug = np.vstack([ctx_x, pts_x[k]])
            y_aug = np.vstack([ctx_y, pts_y[k]])
            row = n_ctx
        grad = finite_difference_influence(
            lambda x, y: fixed_weights_press(x, y, u, v).press_value, x_aug, y_aug, rows=[row]
        )[0]
        mags[k] = grad @ grad
        bad[k] = row in fixed_weights_press(x_aug, y_aug, u, v).clamped_points
    return mags, bad


def rank_by_influence(inf: InfluenceSet | np.ndarray) -> np.ndarray:
    """Row indices by decreasing squared influence, ties by ascending index (0-based)."""
    mags = inf.squared_magnitudes if isinstance(inf, InfluenceSet) else np.asarray(inf, dtype=float)
    return np.lexsort((np.arange(mags.size), -mags))


def rank_by_residual(model: TbplsModel, data: DataPair) -> np.ndarray:
    """Row indices by decreasing squared residual ``||y_i - x_i beta||^2``."""
    x, y = model.center(data.x, data.y)
    e = y - x @ model.beta
    sq = np.einsum("ij,ij->i", e, e)
    # residuals at rounding level are exact fits; let them tie
    floor = (64 * np.finfo(float).eps) ** 2 * max(float(np.mean(np.einsum("ij,ij->i", y, y))), 1e-300)
    return rank_by_influence(np.where(sq <= floor, 0.0, sq))
