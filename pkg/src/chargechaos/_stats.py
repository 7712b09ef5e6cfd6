"""Small estimators shared by the Monte Carlo routines."""
from __future__ import annotations

import numpy as np


def mean_and_se(samples, axis: int = 0):
    """Sample mean and standard error of the mean along ``axis``."""
    x = np.asarray(samples)
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    if n < 2:
        return mean, np.zeros_like(np.real(mean), dtype=float)
    if np.iscomplexobj(x):
        var = x.real.var(axis=axis, ddof=1) + x.imag.var(axis=axis, ddof=1)
    else:
        var = x.var(axis=axis, ddof=1)
    return mean, np.sqrt(var / n)


def leave_one_out_means(samples):
    """Leave-one-out means along axis 0."""
    x = np.asarray(samples)
    n = x.shape[0]
    return (x.sum(axis=0)[None, ...] - x) / (n - 1)


def jackknife_se(replicates):
    """Jackknife standard error from leave-one-out replicates along axis 0."""
    r = np.asarray(replicates)
    n = r.shape[0]
    dev = r - r.mean(axis=0)
    return np.sqrt((n - 1) / n * np.sum(np.abs(dev) ** 2, axis=0))


def pair_ustat(gram_values):
    """U-statistic over ordered pairs m != n of a symmetric kernel.

    Args:
        gram_values: (n, n) array of h(x_m, x_n); the diagonal is ignored.

    Returns:
        (estimate, standard error). The error uses the Hoeffding projection,
        sqrt(4 Var(row means) / n).
    """
    h = np.asarray(gram_values, dtype=float)
    n = h.shape[0]
    if n < 2:
        raise ValueError("need at least two realizations")
    off = h.sum() - np.trace(h)
    est = off / (n * (n - 1))
    rows = (h.sum(axis=1) - np.diag(h)) / (n - 1)
    se = np.sqrt(4.0 * rows.var(ddof=1) / n) if n > 2 else 0.0
    return float(est), float(se)
