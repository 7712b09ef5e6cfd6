"""Independent reference computations used by several test files."""
import itertools
import math

import numpy as np
import sympy as sp

from chargechaos.ensembles import sample_haar_unitaries
from chargechaos.weingarten import L_SYMBOL, WiringSpec, haar_moment


def jw_operators(N):
    """Dense f_i by explicit Kronecker products, qubit 1 leftmost.

    The string factor is diag(1, -1) on |0>, |1> (parity of the occupation).
    """
    parity = np.diag([1.0, -1.0])
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    out = []
    for i in range(N):
        m = np.ones((1, 1))
        for op in [parity] * i + [lower] + [np.eye(2)] * (N - i - 1):
            m = np.kron(m, op)
        out.append(m)
    return out


def syk_dense_bruteforce(tensor):
    N = tensor.shape[0]
    f = jw_operators(N)
    fd = [x.conj().T for x in f]
    H = np.zeros((2**N, 2**N), dtype=complex)
    for i, j, k, l in itertools.product(range(N), repeat=4):
        c = tensor[i, j, k, l]
        if c != 0:
            H += c * (fd[i] @ fd[j] @ f[k] @ f[l])
    return H


def hook_length_count(k, L):
    """sum over partitions of k with at most L rows of (f^lambda)^2."""
    total = 0
    for lam in _partitions(k):
        if len(lam) > L:
            continue
        hooks = 1
        conj = [sum(1 for r in lam if r > c) for c in range(lam[0])]
        for r, row in enumerate(lam):
            for c in range(row):
                hooks *= (row - c - 1) + (conj[c] - r - 1) + 1
        f = math.factorial(k) // hooks
        total += f * f
    return total


def _partitions(n, maxpart=None):
    if maxpart is None:
        maxpart = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, maxpart), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def _canonical(tup):
    seen = {}
    return tuple(seen.setdefault(x, len(seen)) for x in tup)


def haar_moment_table(p):
    """Symbolic value of every index pattern of the order-p moment.

    Keys are canonical relabelings of (i1, j1, ..., ip, jp, k1, l1, ..., kp, lp)
    for the integrand U_{i1 j1} ... U^+_{k1 l1} ...
    """
    cache = {}

    def value(tup):
        key = _canonical(tup)
        if key not in cache:
            u = [(key[2 * a], key[2 * a + 1]) for a in range(p)]
            ud = [(key[2 * p + 2 * a], key[2 * p + 2 * a + 1]) for a in range(p)]
            expr = haar_moment(WiringSpec(u, ud), L_SYMBOL)
            cache[key] = sp.lambdify(L_SYMBOL, expr, "math")
        return cache[key]

    return value


def master_oracle(d, p, n_samples, rng, chunk=10000):
    """Largest |MC - symbolic| / standard error over all index assignments.

    Returns (worst z-score, number of entries checked).
    """
    value = haar_moment_table(p)
    size = d ** (2 * p)
    m1 = np.zeros((size, size), dtype=complex)
    m2 = np.zeros((size, size))
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        U = sample_haar_unitaries(d, n, rng)
        A = U.reshape(n, d * d)
        if p == 2:
            A = (A[:, :, None] * A[:, None, :]).reshape(n, size)
        m1 += A.T @ A.conj()
        a2 = np.abs(A) ** 2
        m2 += a2.T @ a2
        done += n
    m1 /= n_samples
    m2 /= n_samples
    se = np.sqrt(np.maximum(m2 - np.abs(m1) ** 2, 0) / n_samples)
    worst = 0.0
    # row index encodes (i1, j1, ..., ip, jp); column encodes conj(U_{l k}) factors,
    # so the U^+_{k l} labels are read with the pair order swapped
    for row in itertools.product(range(d), repeat=2 * p):
        r = np.ravel_multi_index(row, (d,) * (2 * p))
        for col in itertools.product(range(d), repeat=2 * p):
            c = np.ravel_multi_index(col, (d,) * (2 * p))
            ud = []
            for a in range(p):
                ud += [col[2 * a + 1], col[2 * a]]
            exact = value(tuple(row) + tuple(ud))(d)
            diff = abs(m1[r, c] - exact)
            if se[r, c] > 0:
                worst = max(worst, diff / se[r, c])
            elif diff > 1e-12:
                worst = np.inf
    return worst, size * size
