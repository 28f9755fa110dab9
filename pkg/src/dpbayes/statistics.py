"""Test statistics computed from raw data.

Scalar functions take one dataset and return a
:class:`~dpbayes.bayesfactor.StatisticObservation`. The ``batch_*`` variants
take a stack of replicate datasets, split each into contiguous blocks of the
given sizes, and return an array of shape ``(n_replicates, n_blocks)``;
degenerate blocks come back as ``nan`` so the caller decides how to treat
them.
"""

from __future__ import annotations

import numpy as np

from .bayesfactor import Family, StatisticObservation

__all__ = [
    "DegenerateSampleError",
    "batch_chi2",
    "batch_f",
    "batch_t",
    "batch_z",
    "block_starts",
    "chi2_statistic",
    "f_statistic",
    "t_statistic",
    "z_statistic",
]

# Condition number beyond which a design is treated as rank deficient.
_MAX_CONDITION = 1e10


class DegenerateSampleError(ValueError):
    """The data do not determine the statistic (zero variance, empty margin,
    rank-deficient design)."""


def block_starts(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.intp)
    return np.concatenate(([0], np.cumsum(sizes)[:-1]))


# --- scalar -----------------------------------------------------------------


def t_statistic(x) -> StatisticObservation:
    """One-sample t statistic ``sqrt(n) * mean / sd`` with ``nu = n - 1``.

    >>> t_statistic([-1.0, 1.0]).value
    0.0
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DegenerateSampleError("t statistic needs at least two observations")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("sample has zero variance")
    return StatisticObservation(Family.T, float(np.sqrt(n) * x.mean() / sd), float(n - 1))


def z_statistic(x, sigma: float = 1.0) -> StatisticObservation:
    """Known-variance statistic ``sqrt(n) * mean / sigma``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 1:
        raise DegenerateSampleError("z statistic needs at least one observation")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return StatisticObservation(Family.Z, float(np.sqrt(x.size) * x.mean() / sigma))


def _pearson(table):
    """Pearson independence statistic over the last two axes; nan on a zero margin."""
    table = np.asarray(table, dtype=float)
    total = table.sum(axis=(-2, -1), keepdims=True)
    rows = table.sum(axis=-1, keepdims=True)
    cols = table.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = rows * cols / total
        h = ((table - expected) ** 2 / expected).sum(axis=(-2, -1))
    bad = (rows == 0).any(axis=(-2, -1)) | (cols == 0).any(axis=(-2, -1))
    return np.where(bad, np.nan, h)


def chi2_statistic(table) -> StatisticObservation:
    """Pearson chi-squared statistic of a 2x2 table, ``k = 1``.

    >>> chi2_statistic([[30, 20], [20, 30]]).value
    4.0
    """
    table = np.asarray(table, dtype=float)
    if table.shape == (4,):
        table = table.reshape(2, 2)
    if table.shape != (2, 2):
        raise ValueError(f"expected a 2x2 table, got shape {table.shape}")
    if np.any(table < 0):
        raise ValueError("counts must be non-negative")
    h = float(_pearson(table))
    if np.isnan(h):
        raise DegenerateSampleError("table has an empty row or column")
    return StatisticObservation(Family.CHI2, h, 1.0)


def f_statistic(X, y) -> StatisticObservation:
    """Overall-significance F statistic of a least-squares fit with intercept.

    Returns ``a = p`` and ``b = n - p - 1`` degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError("X and y have different numbers of rows")
    if n < p + 2:
        raise DegenerateSampleError(f"F statistic needs at least p + 2 = {p + 2} observations")
    design = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(design) < p + 1:
        raise DegenerateSampleError("design matrix is rank deficient")
    a_df, b_df = float(p), float(n - p - 1)
    if np.ptp(y) == 0:
        return StatisticObservation(Family.F, 0.0, a_df, b_df)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    ssr = max(sst - sse, 0.0)
    f = (ssr / p) / (sse / b_df) if sse > 0 else np.inf
    if not np.isfinite(f):
        raise DegenerateSampleError("responses are fitted exactly")
    return StatisticObservation(Family.F, f, a_df, b_df)


# --- batched ----------------------------------------------------------------


def _block_means(x, sizes, starts):
    return np.add.reduceat(x, starts, axis=1) / sizes.reshape((1, -1) + (1,) * (x.ndim - 2))


def batch_t(x, sizes) -> np.ndarray:
    """t statistics for every block of every replicate row of ``x``."""
    sizes = np.asarray(sizes, dtype=np.intp)
    starts = block_starts(sizes)
    mean = _block_means(x, sizes, starts)
    dev = x - np.repeat(mean, sizes, axis=1)
    var = np.add.reduceat(dev * dev, starts, axis=1) / (sizes - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.sqrt(sizes) * mean / np.sqrt(var)
    return np.where(var > 0, t, np.nan)


def batch_z(x, sizes, sigma: float = 1.0) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.intp)
    return np.sqrt(sizes) * _block_means(x, sizes, block_starts(sizes)) / sigma


def batch_chi2(cells, sizes) -> np.ndarray:
    """Pearson statistics from per-record cell labels ``0..3`` (``2 X + Y``)."""
    sizes = np.asarray(sizes, dtype=np.intp)
    onehot = (cells[..., None] == np.arange(4)).astype(np.int64)
    counts = np.add.reduceat(onehot, block_starts(sizes), axis=1)
    return _pearson(counts.reshape(counts.shape[:-1] + (2, 2)))


def batch_f(X, y, sizes) -> np.ndarray:
    """F statistics for blocks of a stacked regression ``X`` (R, n, p), ``y`` (R, n)."""
    sizes = np.asarray(sizes, dtype=np.intp)
    starts = block_starts(sizes)
    p = X.shape[-1]
    xc = X - np.repeat(_block_means(X, sizes, starts), sizes, axis=1)
    yc = y - np.repeat(_block_means(y, sizes, starts), sizes, axis=1)
    sxx = np.add.reduceat(xc[..., :, None] * xc[..., None, :], starts, axis=1)
    sxy = np.add.reduceat(xc * yc[..., None], starts, axis=1)
    syy = np.add.reduceat(yc * yc, starts, axis=1)

    cond = np.linalg.cond(sxx)
    ok = np.isfinite(cond) & (cond < _MAX_CONDITION)
    safe = np.where(ok[..., None, None], sxx, np.eye(p))
    beta = np.linalg.solve(safe, sxy[..., None])[..., 0]
    ssr = np.clip((beta * sxy).sum(axis=-1), 0.0, syy)
    b_df = sizes - p - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ssr / p) / ((syy - ssr) / b_df)
    f = np.where(syy > 0, f, 0.0)
    return np.where(ok & np.isfinite(f), f, np.nan)
