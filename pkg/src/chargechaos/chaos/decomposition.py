"""Sector decompositions of the whole-space form factors.

The right-hand sides assume the spectra of different sectors are independent,
so every sector factor is replaced by its own realization average. Standard
errors of those products come from a leave-one-out jackknife.
"""
from __future__ import annotations

import numpy as np

from .._stats import jackknife_se, leave_one_out_means, mean_and_se
from ..series import ObservableSeries
from .form_factors import distinct_sector_sum, power_sums, trace_monomial, whole_power_sums

_R_PARTS = {"R1": ((1,), False), "R2": ((1, -1), False), "R21": ((1, 1), False),
            "R3": ((1, 1, -1), False), "R4": ((1, 1, -1, -1), False)}
_P_PARTS = {"P1": ((1,), False), "P1sq": ((2,), False), "P2": ((1, -1), True),
            "P21": ((1, 1), True), "P22": ((2, -1), True), "P3": ((1, 1, -1), True),
            "P31": ((2, -1, -1), True), "P4": ((1, 1, -1, -1), True), "P2sq": ((2, -2), True)}


def sector_parts(ps: dict, names) -> dict:
    table = {**_R_PARTS, **_P_PARTS}
    return {n: trace_monomial(ps, *table[n]) for n in names}


def r2_rhs(q: dict):
    """sum_p R2_p + sum_{p != q} R1_p R1_q^*."""
    r1 = q["R1"]
    cross = np.abs(np.sum(r1, axis=-1)) ** 2 - np.sum(np.abs(r1) ** 2, axis=-1)
    return np.real(np.sum(q["R2"], axis=-1)) + cross


def r4_rhs(q: dict):
    """Seven-term decomposition of R4 in terms of sector R kinds."""
    R1, R2, R21, R3, R4 = (q[k] for k in ("R1", "R2", "R21", "R3", "R4"))
    c = np.conj
    out = np.sum(R4, axis=-1)
    out = out + 4 * np.real(distinct_sector_sum([R3, c(R1)]))
    out = out + 4 * np.real(distinct_sector_sum([R2, R1, c(R1)]))
    out = out + 2 * np.real(distinct_sector_sum([R21, c(R1), c(R1)]))
    out = out + 2 * np.real(distinct_sector_sum([R2, R2]))
    out = out + np.real(distinct_sector_sum([R21, c(R21)]))
    out = out + distinct_sector_sum([R1, R1, c(R1), c(R1)])
    return np.real(out)


def r4_rhs_distinct(q: dict, L: int):
    """The same decomposition written with distinct-index (P) kinds."""
    c = np.conj
    P1, P1sq = q["P1"], q["P1sq"]
    P2, P21, P22, P3, P31, P4, P2sq = (q[k] for k in ("P2", "P21", "P22", "P3", "P31", "P4", "P2sq"))
    ds = distinct_sector_sum
    out = ds([P1, P1, c(P1), c(P1)])
    out = out + 4 * np.real(ds([P2, P1, c(P1)]))
    out = out + 2 * np.real(ds([P21, c(P1), c(P1)]))
    out = out + 2 * np.real(ds([P1sq, c(P1), c(P1)]))
    out = out + 4 * np.real(ds([P3, c(P1)]))
    out = out + 2 * np.real(ds([P2, P2]))
    out = out + np.real(ds([P21, c(P21)]))
    out = out + 4 * np.real(ds([P22, c(P1)]))
    out = out + 2 * np.real(ds([P1sq, c(P21)]))
    out = out + 4 * (L - 1) * ds([P1, c(P1)])
    out = out + ds([P1sq, c(P1sq)])
    out = out + np.sum(P4, axis=-1) + 2 * np.real(np.sum(P31, axis=-1))
    out = out + 4 * (L - 1) * np.sum(P2, axis=-1) + np.sum(P2sq, axis=-1)
    out = out + 2 * L * L - L
    return np.real(out)


def r2_rhs_distinct(q: dict, L: int):
    """R2 = L + sum_p P2_p + sum_{p != q} P1_p P1_q^*."""
    P1 = q["P1"]
    cross = np.abs(np.sum(P1, axis=-1)) ** 2 - np.sum(np.abs(P1) ** 2, axis=-1)
    return L + np.real(np.sum(q["P2"], axis=-1)) + cross


def _identity_series(lhs, parts: dict, rhs_fn, times, label, n):
    lhs_mean, lhs_se = mean_and_se(lhs)
    means = {k: v.mean(axis=0) for k, v in parts.items()}
    rhs = rhs_fn(means)
    if n > 1:
        loo = {k: leave_one_out_means(v) for k, v in parts.items()}
        rhs_loo = rhs_fn(loo)
        lhs_loo = leave_one_out_means(lhs)
        diff_se = jackknife_se(lhs_loo - rhs_loo)
        rhs_se = jackknife_se(rhs_loo)
    else:
        diff_se = np.zeros_like(lhs_mean)
        rhs_se = np.zeros_like(lhs_mean)
    diff = np.abs(lhs_mean - rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = diff / np.abs(lhs_mean)
        rel_se = diff_se / np.abs(lhs_mean)
        z = np.where(diff_se > 0, diff / diff_se, np.where(diff > 0, np.inf, 0.0))
    masked = np.abs(lhs_mean) < 10 * lhs_se
    rel = np.where(masked, np.nan, rel)
    rel_se = np.where(masked, np.nan, rel_se)
    extra = {"lhs": lhs_mean, "lhs_se": lhs_se, "rhs": rhs, "rhs_se": rhs_se,
             "diff_se": diff_se, "z": z, "masked": masked}
    return ObservableSeries(times, rel, np.nan_to_num(rel_se, nan=0.0), n, label, extra)


def r2_decomposition_check(se, times) -> ObservableSeries:
    """Relative error |LHS - RHS| / |LHS| of the two-point sector decomposition.

    LHS is the whole-spectrum R2; RHS is sum_p <R2_p> + sum_{p != q} <R1_p><R1_q>^*
    with each sector factor averaged on its own. Points where |LHS| is below
    ten standard errors are NaN. ``extra`` holds both sides, their errors and
    the z-score of the difference.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ps = power_sums(se, times, 2)
    lhs = np.real(trace_monomial(whole_power_sums(ps), (1, -1), False))
    parts = sector_parts(ps, ["R1", "R2"])
    return _identity_series(lhs, parts, r2_rhs, times, "r2_decomposition", se.n_realizations)


def r4_decomposition_check(se, times) -> ObservableSeries:
    """As :func:`r2_decomposition_check` for R4.

    ``extra["rhs_distinct"]`` is the same right side written with distinct-index
    kinds and ``extra["rep_agreement"]`` the relative difference of the two.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ps = power_sums(se, times, 2)
    lhs = np.real(trace_monomial(whole_power_sums(ps), (1, 1, -1, -1), False))
    parts = sector_parts(ps, list(_R_PARTS))
    out = _identity_series(lhs, parts, r4_rhs, times, "r4_decomposition", se.n_realizations)
    pparts = sector_parts(ps, list(_P_PARTS))
    prhs = r4_rhs_distinct({k: v.mean(axis=0) for k, v in pparts.items()}, se.L)
    out.extra["rhs_distinct"] = prhs
    out.extra["rep_agreement"] = np.abs(prhs - out.extra["rhs"]) / np.abs(out.extra["rhs"])
    return out


def general_r2k_partition(se, k: int, times) -> ObservableSeries:
    """Partition-sum prediction of the whole R_2k from sector averages (k <= 2)."""
    if k not in (1, 2):
        raise ValueError("partition sums are implemented for k = 1 and k = 2")
    check = (r2_decomposition_check if k == 1 else r4_decomposition_check)(se, times)
    return ObservableSeries(check.times, check.extra["rhs"], check.extra["rhs_se"],
                            check.realizations, f"R{2 * k}_partition")


def sff_morphology(series: ObservableSeries, prediction=None, late_fraction: float = 0.25) -> dict:
    """Locate the dip and the plateau of a form-factor curve.

    The plateau is the mean over the last ``late_fraction`` of the grid. The
    dip is the minimum before that window. With ``prediction`` (a series or
    array on the same grid) the plateau is compared to its late-time mean.
    """
    v = np.asarray(series.values, dtype=float)
    n = len(v)
    start = max(1, int(round(n * (1 - late_fraction))))
    plateau = float(np.mean(v[start:]))
    i_dip = int(np.argmin(v[:start]))
    out = {
        "dip_time": float(series.times[i_dip]),
        "dip_value": float(v[i_dip]),
        "plateau_mean": plateau,
        "initial_value": float(v[0]),
        "dip_before_plateau": bool(v[i_dip] < plateau and i_dip < start and v[0] > v[i_dip]),
    }
    if prediction is not None:
        p = np.asarray(getattr(prediction, "values", prediction), dtype=float)
        pred = float(np.mean(p[start:]))
        out["plateau_prediction"] = pred
        out["plateau_relative_error"] = abs(plateau - pred) / abs(pred)
    return out
