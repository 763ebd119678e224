"""Matrix containers, column standardization and the truncated SVD used everywhere."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError


class Policy(str, Enum):
    CENTER_AND_SCALE = "center_and_scale"
    CENTER_ONLY = "center_only"
    NONE = "none"


def as_dense(m) -> np.ndarray:
    """Return a finite, 2-D float64 ndarray view of `m` (sparse input is densified)."""
    if sp.issparse(m):
        m = m.toarray()
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    return a


def sparse_from_triplets(rows, cols, values, shape) -> sp.csr_matrix:
    """Build a CSR matrix from coordinate triplets, rejecting duplicates and out-of-range indices."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    n, d = shape
    if n < 1 or d < 1:
        raise InvalidInputError(f"invalid sparse shape {shape}")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= d:
            raise InvalidInputError("triplet index out of bounds")
        keys = rows * d + cols
        if np.unique(keys).size != keys.size:
            raise InvalidInputError("duplicate (row, col) pair in triplets")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("sparse values contain non-finite entries")
    return sp.csr_matrix((values, (rows, cols)), shape=(n, d))


@dataclass(frozen=True)
class StandardizationInfo:
    column_means: np.ndarray
    column_scales: np.ndarray
    policy: Policy
    constant_columns: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def apply(self, m) -> np.ndarray:
        a = as_dense(m)
        if a.shape[1] != self.column_means.size:
            raise InvalidInputError(
                f"column mismatch: matrix has {a.shape[1]}, standardization expects {self.column_means.size}"
            )
        return (a - self.column_means) / self.column_scales

    def invert(self, m) -> np.ndarray:
        return np.asarray(m) * self.column_scales + self.column_means


def standardize(m, policy: Policy | str = Policy.CENTER_AND_SCALE) -> tuple[np.ndarray, StandardizationInfo]:
    """Center (and optionally scale to unit sample sd) each column.

    Constant columns keep scale 1 and are listed in ``constant_columns``;
    they are never dropped so paired views keep their column indexing.
    """
    policy = Policy(policy)
    a = as_dense(m)
    n, d = a.shape
    if policy is Policy.NONE:
        info = StandardizationInfo(np.zeros(d), np.ones(d), policy)
        return a.copy(), info
    if policy is Policy.CENTER_AND_SCALE and n < 2:
        raise InvalidInputError("scaling needs at least 2 rows")
    means = a.mean(axis=0)
    centered = a - means
    scales = np.ones(d)
    constant = np.zeros(0, dtype=int)
    if policy is Policy.CENTER_AND_SCALE:
        sd = centered.std(axis=0, ddof=1)
        # relative threshold so float noise on a constant column does not count as variance
        tiny = sd <= 1e-12 * np.maximum(1.0, np.abs(means))
        constant = np.flatnonzero(tiny)
        scales = np.where(tiny, 1.0, sd)
        centered[:, tiny] = 0.0
    out = centered / scales
    # a second pass removes residual rounding in the means so repeated application is stable
    out -= out.mean(axis=0)
    return out, StandardizationInfo(means, scales, policy, constant)


@dataclass(frozen=True)
class SvdResult:
    left_vectors: np.ndarray  # p x r
    right_vectors: np.ndarray  # q x r
    singular_values: np.ndarray  # r

    @property
    def rank(self) -> int:
        return self.singular_values.size


def _fix_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each left vector made positive; ties go to the lowest index
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, v * signs


def truncated_svd(m, r: int) -> SvdResult:
    """Top-`r` singular triplets of `m` with a deterministic sign convention."""
    a = as_dense(m)
    r = int(r)
    if r < 1 or r > min(a.shape):
        raise InvalidInputError(f"r={r} out of range for a {a.shape[0]}x{a.shape[1]} matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, v = _fix_signs(u[:, :r], vt[:r].T)
    return SvdResult(np.ascontiguousarray(u), np.ascontiguousarray(v), s[:r].copy())


def numerical_rank(m, rtol: float = 1e-10) -> int:
    a = as_dense(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))
