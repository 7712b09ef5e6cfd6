"""Pure-Python/numpy versions of the compiled kernels."""
from bisect import bisect_left
from itertools import permutations

import numpy as np

# keeps the (chunk, T, L) phase array near 32 MB
_CHUNK_BYTES = 1 << 25


def power_sums(energies, offsets, times, orders):
    energies = np.ascontiguousarray(energies, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    times = np.asarray(times, dtype=np.float64)
    orders = np.asarray(orders, dtype=np.int64)
    R, L = energies.shape
    T, M, S = len(times), len(orders), len(offsets) - 1
    out = np.empty((R, T, M, S), dtype=np.complex128)
    chunk = max(1, _CHUNK_BYTES // max(1, 16 * T * L))
    starts = offsets[:-1]
    for r0 in range(0, R, chunk):
        e = energies[r0:r0 + chunk]
        base = np.exp(1j * times[None, :, None] * e[:, None, :])
        for mi, m in enumerate(orders):
            z = base ** m if m >= 0 else np.conj(base) ** (-m)
            out[r0:r0 + chunk, :, mi, :] = np.add.reduceat(z, starts, axis=2)
    return out


def syk_assemble(couplings, target, cidx, coef, size):
    out = np.zeros(size, dtype=np.complex128)
    np.add.at(out, target, coef * couplings[cidx])
    return out


def _lis(seq):
    tails = []
    for x in seq:
        i = bisect_left(tails, x)
        if i == len(tails):
            tails.append(x)
        else:
            tails[i] = x
    return len(tails)


def lis_count(k, L):
    if k <= 0 or k > 16:
        raise ValueError("k out of range")
    return sum(1 for p in permutations(range(k)) if _lis(p) <= L)
