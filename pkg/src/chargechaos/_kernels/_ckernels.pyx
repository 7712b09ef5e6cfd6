# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors _pykernels exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin
from libc.stdlib cimport malloc, free

cnp.import_array()


def power_sums(const double[:, ::1] energies, const cnp.int64_t[::1] offsets,
               const double[::1] times, const cnp.int64_t[::1] orders):
    cdef Py_ssize_t R = energies.shape[0]
    cdef Py_ssize_t T = times.shape[0]
    cdef Py_ssize_t M = orders.shape[0]
    cdef Py_ssize_t S = offsets.shape[0] - 1
    cdef Py_ssize_t r, ti, mi, s, a, j, mabs, maxm = 1
    for mi in range(M):
        mabs = orders[mi] if orders[mi] >= 0 else -orders[mi]
        if mabs > maxm:
            maxm = mabs
    out = np.zeros((R, T, M, S), dtype=np.complex128)
    cdef double[:, :, :, ::1] view = out.view(np.float64).reshape(R, T, M, 2 * S)
    cdef double *pre = <double *> malloc((maxm + 1) * sizeof(double))
    cdef double *pim = <double *> malloc((maxm + 1) * sizeof(double))
    cdef double th, c, sn, re, im, tmp
    try:
        for r in range(R):
            for ti in range(T):
                for s in range(S):
                    for a in range(offsets[s], offsets[s + 1]):
                        th = times[ti] * energies[r, a]
                        c = cos(th)
                        sn = sin(th)
                        pre[0] = 1.0
                        pim[0] = 0.0
                        for j in range(1, maxm + 1):
                            pre[j] = pre[j - 1] * c - pim[j - 1] * sn
                            pim[j] = pre[j - 1] * sn + pim[j - 1] * c
                        for mi in range(M):
                            if orders[mi] >= 0:
                                view[r, ti, mi, 2 * s] += pre[orders[mi]]
                                view[r, ti, mi, 2 * s + 1] += pim[orders[mi]]
                            else:
                                view[r, ti, mi, 2 * s] += pre[-orders[mi]]
                                view[r, ti, mi, 2 * s + 1] -= pim[-orders[mi]]
    finally:
        free(pre)
        free(pim)
    return out


def syk_assemble(const double complex[::1] couplings, const cnp.int64_t[::1] target,
                 const cnp.int64_t[::1] cidx, const double[::1] coef, Py_ssize_t size):
    cdef Py_ssize_t n = target.shape[0]
    cdef Py_ssize_t e, t2, c2
    out = np.zeros(size, dtype=np.complex128)
    # real and imaginary parts as interleaved doubles
    cdef double[::1] o = out.view(np.float64)
    cdef const double[::1] cp = np.asarray(couplings).view(np.float64)
    for e in range(n):
        t2 = 2 * target[e]
        c2 = 2 * cidx[e]
        o[t2] += coef[e] * cp[c2]
        o[t2 + 1] += coef[e] * cp[c2 + 1]
    return out


cdef int _lis(int *perm, int k, int *tails):
    cdef int n = 0, i, lo, hi, mid, x
    for i in range(k):
        x = perm[i]
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) >> 1
            if tails[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        tails[lo] = x
        if lo == n:
            n += 1
    return n


def lis_count(int k, int L):
    cdef int perm[16]
    cdef int c[16]
    cdef int tails[16]
    cdef int i = 0, tmp
    cdef long long count = 0
    if k <= 0 or k > 16:
        raise ValueError("k out of range")
    for i in range(k):
        perm[i] = i
        c[i] = 0
    if _lis(perm, k, tails) <= L:
        count += 1
    # Heap's algorithm
    i = 1
    while i < k:
        if c[i] < i:
            if i % 2 == 0:
                tmp = perm[0]; perm[0] = perm[i]; perm[i] = tmp
            else:
                tmp = perm[c[i]]; perm[c[i]] = perm[i]; perm[i] = tmp
            if _lis(perm, k, tails) <= L:
                count += 1
            c[i] += 1
            i = 1
        else:
            c[i] = 0
            i += 1
    return count
