"""Spectral form factors from eigenvalues.

Every form factor is a product of power sums p_m = sum_a exp(i m t E_a). The
R kinds sum over all eigenvalue indices; the P kinds restrict to pairwise
distinct indices, which is done by Moebius inversion over set partitions:

    sum_{a1 != ... != an} prod_i x_i(a_i) = sum_pi mu(pi) prod_{B in pi} sum_a prod_{i in B} x_i(a)

with mu(pi) = prod_B (-1)^(|B|-1) (|B|-1)!. The same identity gives sums over
pairwise distinct charge sectors.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import _kernels
from .._stats import mean_and_se
from ..series import ObservableSeries

R_KINDS = {
    "R1": (1,),
    "R2": (1, -1),
    "R21": (1, 1),
    "R22": (2, -1),
    "R3": (1, 1, -1),
    "R31": (2, -1, -1),
    "R4": (1, 1, -1, -1),
    # Tr(U^2): P1 of the squared spectrum
    "P1sq": (2,),
}
P_KINDS = {
    "P1": (1,),
    "P2": (1, -1),
    "P21": (1, 1),
    "P22": (2, -1),
    "P3": (1, 1, -1),
    "P31": (2, -1, -1),
    "P4": (1, 1, -1, -1),
    # distinct-index version of |Tr U^2|^2
    "P2sq": (2, -2),
}
FORM_FACTOR_KINDS = tuple(R_KINDS) + tuple(P_KINDS)


def parse_kind(kind: str) -> tuple:
    """(exponent vector, distinct flag) for a kind name; "R2k" for any k."""
    if kind in R_KINDS:
        return R_KINDS[kind], False
    if kind in P_KINDS:
        return P_KINDS[kind], True
    m = re.fullmatch(r"R(\d+)", kind)
    if m and int(m.group(1)) % 2 == 0 and int(m.group(1)) > 0:
        k = int(m.group(1)) // 2
        return (1,) * k + (-1,) * k, False
    raise ValueError(f"unknown form factor kind {kind!r}")


@lru_cache(maxsize=None)
def set_partitions(n: int) -> tuple:
    """All set partitions of range(n) with their Moebius weights."""
    def rec(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for part in rec(rest):
            for i in range(len(part)):
                yield part[:i] + [[first] + part[i]] + part[i + 1:]
            yield [[first]] + part

    out = []
    for part in rec(list(range(n))):
        mu = 1
        for block in part:
            mu *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
        out.append((mu, tuple(tuple(b) for b in part)))
    return tuple(out)


def trace_monomial(power_sums: dict, exponents, distinct: bool):
    """Product of power sums, optionally restricted to distinct indices.

    Args:
        power_sums: mapping m -> array of p_m (any common shape); p_0 must be
            the index count.
    """
    if not distinct:
        out = 1
        for e in exponents:
            out = out * power_sums[e]
        return out
    total = 0
    for mu, part in set_partitions(len(exponents)):
        term = mu
        for block in part:
            term = term * power_sums[sum(exponents[i] for i in block)]
        total = total + term
    return total


def distinct_sector_sum(factors):
    """sum over pairwise distinct sectors p1, ..., pn of prod_i f_i[..., p_i].

    Args:
        factors: list of arrays whose last axis runs over sectors.
    """
    total = 0
    for mu, part in set_partitions(len(factors)):
        term = mu
        for block in part:
            prod = 1
            for i in block:
                prod = prod * factors[i]
            term = term * np.sum(prod, axis=-1)
        total = total + term
    return total


def power_sums(se, times, max_order: int = 2) -> dict:
    """Per-realization, per-sector power sums for orders -max..max.

    Returns:
        dict m -> complex array (R, T, S).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    orders = np.arange(1, max_order + 1, dtype=np.int64)
    raw = _kernels.power_sums(np.ascontiguousarray(se.eigenvalues, dtype=np.float64),
                              se.offsets, times, orders)
    out = {0: np.broadcast_to(np.asarray(se.sector_dims, dtype=np.complex128),
                              raw.shape[:2] + (len(se.sector_dims),))}
    for i, m in enumerate(orders):
        out[int(m)] = raw[:, :, i, :]
        out[-int(m)] = np.conj(raw[:, :, i, :])
    return out


def whole_power_sums(ps: dict) -> dict:
    return {m: np.sum(v, axis=-1) for m, v in ps.items()}


def _max_order(exps, distinct):
    if not distinct:
        return max(abs(e) for e in exps)
    return max(sum(e for e in exps if e > 0), -sum(e for e in exps if e < 0))


def sector_statistic(se, kind: str, times, ps: dict | None = None):
    """Per-realization value of ``kind`` in every sector, shape (R, T, S)."""
    exps, distinct = parse_kind(kind)
    need = _max_order(exps, distinct)
    if ps is None or max(ps) < need:
        ps = power_sums(se, times, max(2, need))
    return trace_monomial(ps, exps, distinct)


def whole_statistic(se, kind: str, times, ps: dict | None = None):
    """Per-realization value of ``kind`` on the whole spectrum, shape (R, T)."""
    exps, distinct = parse_kind(kind)
    need = _max_order(exps, distinct)
    if ps is None or max(ps) < need:
        ps = power_sums(se, times, max(2, need))
    return trace_monomial(whole_power_sums(ps), exps, distinct)


@dataclass(frozen=True)
class FormFactor:
    value: float
    std_error: float
    complex_value: complex


def _check_nonempty(se):
    if se.n_realizations < 1 or se.eigenvalues.size == 0:
        raise ValueError("spectral ensemble has no data")


def form_factor_series(se, kind: str, times, scope="whole") -> ObservableSeries:
    """Realization average of ``kind`` on a time grid.

    ``scope`` is "whole" or a sector index. The real part is reported; the
    complex mean is kept in ``extra["complex"]``.
    """
    _check_nonempty(se)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if scope == "whole":
        x = whole_statistic(se, kind, times)
    else:
        q = int(scope)
        if not 0 <= q < se.n_sectors:
            raise ValueError(f"sector {q} out of range")
        x = sector_statistic(se, kind, times)[:, :, q]
    mean, _ = mean_and_se(x)
    _, se_re = mean_and_se(np.real(x))
    return ObservableSeries(times, np.real(mean), se_re, se.n_realizations,
                            f"{kind}[{scope}]", {"complex": mean})


def form_factor(se, kind: str, t: float, scope="whole") -> FormFactor:
    s = form_factor_series(se, kind, [t], scope)
    return FormFactor(float(s.values[0]), float(s.std_errors[0]), complex(s.extra["complex"][0]))
