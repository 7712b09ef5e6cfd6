"""Frame potentials and k-invariance.

Estimators are U-statistics over ordered pairs of distinct realizations;
including the diagonal would add L^2k / n to the estimate.
"""
from __future__ import annotations

import math

import numpy as np

from .. import rng as rngmod
from .._stats import jackknife_se, leave_one_out_means, pair_ustat
from ..ensembles import sample_haar_unitary
from ..hilbert import BlockMatrix, embed_blocks
from ..series import ObservableSeries
from .form_factors import power_sums


def _as_vectors(ens) -> np.ndarray:
    """Rows vec(U_m); for block ensembles the sector blocks are concatenated."""
    rows = []
    for u in ens:
        if isinstance(u, BlockMatrix):
            rows.append(np.concatenate([b.ravel() for b in u.blocks]))
        elif isinstance(u, (list, tuple)):
            rows.append(np.concatenate([np.asarray(b).ravel() for b in u]))
        else:
            rows.append(np.asarray(u).ravel())
    return np.stack(rows)


def _as_dense(u) -> np.ndarray:
    if isinstance(u, BlockMatrix):
        return embed_blocks(u)
    if isinstance(u, (list, tuple)):
        from scipy.linalg import block_diag
        return block_diag(*u)
    return np.asarray(u)


def overlap_gram(ens) -> np.ndarray:
    """G[m, n] = Tr(U_m U_n^+)."""
    v = _as_vectors(ens)
    return v @ v.conj().T


def frame_potential(ens, k: int) -> tuple:
    """Estimate F^(k) = E |Tr(U V^+)|^2k over independent pairs.

    Args:
        ens: sequence of unitaries (dense arrays, BlockMatrix or lists of
            sector blocks), at least two.
        k: moment order.

    Returns:
        (value, standard error).
    """
    if len(ens) < 2:
        raise ValueError("frame potential needs at least two realizations")
    g = overlap_gram(ens)
    return pair_ustat(np.abs(g) ** (2 * k))


def _block_unitaries(se, t):
    """(R, sum d_q^2) rows of vec(U_r(t)) from stored eigenvectors."""
    if se.vectors is None:
        raise ValueError("ensemble was built without eigenvectors")
    pieces = []
    o = se.offsets
    for q in range(se.n_sectors):
        v = np.stack([se.vectors[r][q] for r in range(se.n_realizations)])
        e = se.eigenvalues[:, o[q]:o[q + 1]]
        u = (v * np.exp(1j * t * e)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
        pieces.append(u.reshape(se.n_realizations, -1))
    return np.concatenate(pieces, axis=1)


def frame_potential_series(se, k: int, times) -> ObservableSeries:
    """F^(k)(t) of U_r(t) = exp(i t H_r) from a spectral ensemble with vectors."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if se.n_realizations < 2:
        raise ValueError("frame potential needs at least two realizations")
    vals, errs = [], []
    for t in times:
        v = _block_unitaries(se, t)
        g = v @ v.conj().T
        est, err = pair_ustat(np.abs(g) ** (2 * k))
        vals.append(est)
        errs.append(err)
    return ObservableSeries(times, vals, errs, se.n_realizations, f"F{k}")


def f1_from_sector_means(r1, r2, dims):
    """Sector prediction of F^(1) from averaged sector R1 and R2 (last axis)."""
    dims = np.asarray(dims, dtype=float)
    r2 = np.real(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        branch = (r2**2 + dims**2 - 2 * r2) / (dims**2 - 1)
    branch = np.where(dims == 1, 1.0, branch)
    a = np.abs(r1) ** 2 / dims
    cross = np.sum(a, axis=-1) ** 2 - np.sum(a * a, axis=-1)
    return np.sum(branch, axis=-1) + cross


def f1_analytic(se, times) -> ObservableSeries:
    """Sector-sum prediction of F^(1)(t) from per-sector R1 and R2.

    Each sector contributes (R2^2 + d^2 - 2 R2)/(d^2 - 1), or 1 for d = 1, and
    distinct sectors add |R1_p|^2 |R1_q|^2 / (d_p d_q). R2^2 is the square of
    the averaged sector form factor. Errors by jackknife.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ps = power_sums(se, times, 1)
    r1 = ps[1]
    r2 = np.abs(ps[1]) ** 2
    dims = se.sector_dims
    value = f1_from_sector_means(r1.mean(0), r2.mean(0), dims)
    n = se.n_realizations
    if n > 1:
        err = jackknife_se(f1_from_sector_means(leave_one_out_means(r1), leave_one_out_means(r2), dims))
    else:
        err = np.zeros_like(value)
    return ObservableSeries(times, value, err, n, "F1_analytic")


def f1_decomposition_check(se, times) -> ObservableSeries:
    """Relative error between the sampled F^(1)(t) and :func:`f1_analytic`."""
    direct = frame_potential_series(se, 1, times)
    pred = f1_analytic(se, times)
    diff = np.abs(direct.values - pred.values)
    rel = diff / np.abs(direct.values)
    comb = np.sqrt(direct.std_errors**2 + pred.std_errors**2)
    return ObservableSeries(direct.times, rel, comb / np.abs(direct.values), se.n_realizations,
                            "f1_decomposition", {"direct": direct.values, "direct_se": direct.std_errors,
                                                 "analytic": pred.values, "analytic_se": pred.std_errors})


def k_invariance(ens, k: int, haar_conjugations: int = 1, rng=None) -> tuple:
    """Estimate I^(k) = F_E^(k) - F_E~^(k) with E~ = {W U W^+, W Haar}.

    Each realization is conjugated by a fresh full-dimension Haar W in every
    round. The estimate is the U-statistic of the pairwise difference of the
    two kernels, so its error accounts for their correlation.

    Returns:
        (value, standard error).
    """
    if len(ens) < 2:
        raise ValueError("k-invariance needs at least two realizations")
    g = np.random.default_rng() if rng is None else rngmod.as_generator(rng)
    dense = [_as_dense(u) for u in ens]
    d = dense[0].shape[0]
    h = np.abs(overlap_gram(dense)) ** (2 * k)
    hc = np.zeros_like(h)
    rounds = max(1, int(haar_conjugations))
    for _ in range(rounds):
        conj = []
        for u in dense:
            w = sample_haar_unitary(d, g)
            conj.append(w @ u @ w.conj().T)
        hc += np.abs(overlap_gram(conj)) ** (2 * k)
    hc /= rounds
    return pair_ustat(h - hc)


def haar_frame_potential(k: int, L: int) -> int:
    """F^(k) of the Haar ensemble (equal to R_2k, i.e. k! when k <= L)."""
    from ..weingarten import lis_count
    return lis_count(k, L) if k <= 8 else math.factorial(k)
