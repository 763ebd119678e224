"""Two-block PLS regression fitted from a single SVD of the cross-product X'Y."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg_core import Policy, StandardizationInfo, as_dense, standardize, truncated_svd


@dataclass(frozen=True)
class DataPair:
    """Paired views with matching rows. ``x`` is n x p, ``y`` is n x q."""

    x: np.ndarray
    y: np.ndarray
    x_info: StandardizationInfo | None = None
    y_info: StandardizationInfo | None = None

    def __post_init__(self):
        x, y = as_dense(self.x), as_dense(self.y)
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"views disagree on row count: {x.shape[0]} vs {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_raw(cls, x, y, policy: Policy | str = Policy.CENTER_AND_SCALE) -> "DataPair":
        xs, xi = standardize(x, policy)
        ys, yi = standardize(y, policy)
        return cls(xs, ys, xi, yi)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]

    def subset(self, rows) -> "DataPair":
        rows = np.asarray(rows)
        return DataPair(self.x[rows], self.y[rows], self.x_info, self.y_info)


@dataclass(frozen=True)
class FactorSet:
    u: np.ndarray
    v: np.ndarray
    t: np.ndarray
    s: np.ndarray
    g: float
    q_loading: np.ndarray
    p_loading: np.ndarray
    lam: float


@dataclass(frozen=True)
class TbplsModel:
    factors: tuple[FactorSet, ...]
    beta: np.ndarray
    residuals_x: np.ndarray
    residuals_y: np.ndarray  # Y - X beta
    outer_residuals_y: np.ndarray  # Y - sum_r s q'
    inner_residuals: np.ndarray  # n x R, column r is s - t g
    n: int
    p: int
    q: int
    requested_factors: int = 0
    rank_reduced: bool = False
    x_mean: np.ndarray | None = None
    y_mean: np.ndarray | None = None
    id: int = field(default=0, compare=False)

    def center(self, x, y=None):
        """Map raw rows into the model's (possibly centered) coordinates."""
        x = np.asarray(x, dtype=float)
        xc = x - self.x_mean if self.x_mean is not None else x
        if y is None:
            return xc
        y = np.asarray(y, dtype=float)
        return xc, (y - self.y_mean if self.y_mean is not None else y)

    @property
    def r(self) -> int:
        return len(self.factors)

    @property
    def u(self) -> np.ndarray:
        return np.column_stack([f.u for f in self.factors])

    @property
    def v(self) -> np.ndarray:
        return np.column_stack([f.v for f in self.factors])

    @property
    def g(self) -> np.ndarray:
        return np.array([f.g for f in self.factors])

    @property
    def q_loadings(self) -> np.ndarray:
        return np.column_stack([f.q_loading for f in self.factors])

    @property
    def t(self) -> np.ndarray:
        return np.column_stack([f.t for f in self.factors])

    @property
    def s(self) -> np.ndarray:
        return np.column_stack([f.s for f in self.factors])


_model_counter = iter(range(1, 1 << 62))

# singular values below this fraction of the largest are treated as rank deficiency
RANK_RTOL = 1e-10


def fit(data: DataPair, r_factors: int = 1, center: bool = False) -> TbplsModel:
    """Fit an R-factor TB-PLS model.

    All R weight pairs come from one SVD of X'Y (no deflation). Scores are
    ``t = X u`` and ``s = Y v``; the inner slope ``g`` regresses s on t and
    the Y loading ``q`` regresses Y on s. If X'Y has fewer than R
    numerically non-zero singular values, R is reduced and ``rank_reduced``
    is set. With ``center=True`` the rows are centered first and the means
    become part of the model (prediction adds the Y mean back).
    """
    x, y = data.x, data.y
    x_mean = y_mean = None
    if center:
        x_mean, y_mean = x.mean(axis=0), y.mean(axis=0)
        x, y = x - x_mean, y - y_mean
    n, p = x.shape
    q = y.shape[1]
    r_factors = int(r_factors)
    if n < 3:
        raise InvalidInputError(f"TB-PLS needs at least 3 observations, got {n}")
    if r_factors < 1 or r_factors > min(p, q, n - 1):
        raise InvalidInputError(f"r_factors={r_factors} must lie in [1, min(p, q, n-1)={min(p, q, n - 1)}]")

    svd = truncated_svd(x.T @ y, min(p, q))
    sv = svd.singular_values
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
    if rank == 0:
        raise InvalidInputError("X'Y is numerically zero; no latent factor can be fitted")
    r_used = min(r_factors, rank)

    factors = []
    beta = np.zeros((p, q))
    ex = x.copy()
    outer = y.copy()
    inner = np.empty((n, r_used))
    for r in range(r_used):
        u = svd.left_vectors[:, r]
        v = svd.right_vectors[:, r]
        t = x @ u
        s = y @ v
        tt = t @ t
        ss = s @ s
        g = (t @ s) / tt
        q_load = (y.T @ s) / ss
        p_load = (x.T @ t) / tt
        factors.append(FactorSet(u, v, t, s, float(g), q_load, p_load, float(sv[r])))
        beta += g * np.outer(u, q_load)
        ex -= np.outer(t, p_load)
        outer -= np.outer(s, q_load)
        inner[:, r] = s - t * g

    return TbplsModel(
        factors=tuple(factors),
        beta=beta,
        residuals_x=ex,
        residuals_y=y - x @ beta,
        outer_residuals_y=outer,
        inner_residuals=inner,
        n=n,
        p=p,
        q=q,
        requested_factors=r_factors,
        rank_reduced=r_used < r_factors,
        x_mean=x_mean,
        y_mean=y_mean,
        id=next(_model_counter),
    )


def predict(model: TbplsModel, x_new) -> np.ndarray:
    x_new = as_dense(x_new)
    if x_new.shape[1] != model.p:
        raise InvalidInputError(f"x_new has {x_new.shape[1]} columns, model expects {model.p}")
    pred = model.center(x_new) @ model.beta
    return pred + model.y_mean if model.y_mean is not None else pred


def _fit_reduced(data: DataPair, r_factors: int) -> TbplsModel:
    r_cap = min(r_factors, data.p, data.q, data.n - 1)
    return fit(data, r_cap)


def loo_prediction_error(
    data: DataPair,
    r_factors: int = 1,
    policy: Policy | str = Policy.CENTER_AND_SCALE,
) -> tuple[np.ndarray, float]:
    """Brute-force leave-one-out error: n full refits, SVD included.

    Each refit re-standardizes the remaining n-1 rows under `policy`; the
    held-out row is mapped with that training standardization and the
    prediction is mapped back to the units of ``data.y``.
    Returns the n x q matrix of LOO residuals and their mean squared norm.
    """
    n = data.n
    if n < 4:
        raise InvalidInputError(f"LOO needs at least 4 observations, got {n}")
    errors = np.empty((n, data.q))
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        mask[i] = False
        xs, xi = standardize(data.x[mask], policy)
        ys, yi = standardize(data.y[mask], policy)
        model = _fit_reduced(DataPair(xs, ys), r_factors)
        pred = yi.invert(xi.apply(data.x[i : i + 1]) @ model.beta)
        errors[i] = data.y[i] - pred[0]
        mask[i] = True
    return errors, float(np.mean(np.sum(errors**2, axis=1)))
