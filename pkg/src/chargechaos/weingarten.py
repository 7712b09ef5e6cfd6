"""Exact Haar moments through Weingarten calculus.

Moments of U and U^+ entries are double sums over permutations,

    int dU U_{i1 j1} ... U_{ip jp} (U^+)_{i'1 j'1} ... (U^+)_{i'p j'p}
        = sum_{a, b in S_p} prod_k delta(i_k, j'_{a(k)}) delta(j_k, i'_{b(k)}) Wg(a^-1 b),

evaluated here with exact rational functions of the dimension (sympy).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import sympy as sp

from . import _kernels

L_SYMBOL = sp.Symbol("L", positive=True)
MAX_ORDER = 4


class UnsupportedOrderError(ValueError):
    pass


class SingularDimensionError(ValueError):
    pass


def _wg_table(L):
    return {
        (1,): 1 / L,
        (2,): -1 / (L * (L - 1) * (L + 1)),
        (1, 1): 1 / ((L - 1) * (L + 1)),
        (3,): 2 / (L * (L - 2) * (L - 1) * (L + 1) * (L + 2)),
        (2, 1): -1 / ((L - 2) * (L - 1) * (L + 1) * (L + 2)),
        (1, 1, 1): (L**2 - 2) / (L * (L - 2) * (L - 1) * (L + 1) * (L + 2)),
        (4,): -5 / (L * (L - 3) * (L - 2) * (L - 1) * (L + 1) * (L + 2) * (L + 3)),
        (3, 1): (2 * L**2 - 3) / (L**2 * (L - 3) * (L - 2) * (L - 1) * (L + 1) * (L + 2) * (L + 3)),
        (2, 2): (L**2 + 6) / (L**2 * (L - 3) * (L - 2) * (L - 1) * (L + 1) * (L + 2) * (L + 3)),
        (2, 1, 1): -1 / (L * (L - 3) * (L - 1) * (L + 1) * (L + 3)),
        (1, 1, 1, 1): (L**4 - 8 * L**2 + 6)
        / (L**2 * (L - 3) * (L - 2) * (L - 1) * (L + 1) * (L + 2) * (L + 3)),
    }


_WG = _wg_table(L_SYMBOL)


def _as_dimension(L):
    if isinstance(L, sp.Basic) and not L.is_number:
        return L
    if isinstance(L, str):
        return sp.Symbol(L, positive=True)
    return sp.Integer(int(L))


def _normalize_cycle_type(cycle_type) -> tuple:
    ct = tuple(sorted((int(c) for c in cycle_type), reverse=True))
    if not ct or any(c < 1 for c in ct):
        raise ValueError(f"invalid cycle type {cycle_type!r}")
    return ct


def wg_unitary(cycle_type, L=L_SYMBOL):
    """Unitary Weingarten function for a cycle type with at most 4 boxes.

    Args:
        cycle_type: partition of p, e.g. (2, 1).
        L: dimension, either a sympy symbol (exact rational function) or an
            integer (exact rational number, needs L >= p).
    """
    ct = _normalize_cycle_type(cycle_type)
    p = sum(ct)
    if p > MAX_ORDER:
        raise UnsupportedOrderError(f"Weingarten table covers p <= {MAX_ORDER}, got p={p}")
    L = _as_dimension(L)
    if L.is_number:
        if L < p:
            raise SingularDimensionError(f"Wg at p={p} needs L >= {p}, got L={L}")
        return sp.nsimplify(_WG[ct].subs(L_SYMBOL, L))
    return sp.factor(_WG[ct].subs(L_SYMBOL, L))


def wg_coe(cycle_type, L=L_SYMBOL):
    """Orthogonal-ensemble (COE) Weingarten values for p <= 2, as tabulated."""
    ct = _normalize_cycle_type(cycle_type)
    if sum(ct) > 2:
        raise UnsupportedOrderError("COE values are only provided for p <= 2")
    L = _as_dimension(L)
    table = {
        (1,): 1 / (L + 1),
        (1, 1): (L + 2) / (L * (L + 1) * (L + 3)),
        (2,): -1 / (L * (L + 1) * (L + 3)),
    }
    return sp.nsimplify(table[ct]) if L.is_number else table[ct]


def cycle_type(perm) -> tuple:
    """Cycle type of a permutation given as a tuple of images."""
    seen = [False] * len(perm)
    out = []
    for s in range(len(perm)):
        if seen[s]:
            continue
        n, x = 0, s
        while not seen[x]:
            seen[x] = True
            x = perm[x]
            n += 1
        out.append(n)
    return tuple(sorted(out, reverse=True))


def _inverse(perm):
    inv = [0] * len(perm)
    for i, x in enumerate(perm):
        inv[x] = i
    return tuple(inv)


def _compose(a, b):
    """(a o b)(k) = a(b(k))."""
    return tuple(a[x] for x in b)


def _pairs(p):
    perms = list(permutations(range(p)))
    for a in perms:
        ainv = _inverse(a)
        for b in perms:
            yield a, b, cycle_type(_compose(ainv, b))


# ---------------------------------------------------------------- index wirings

@dataclass(frozen=True)
class WiringSpec:
    """Index labels of U and U^+ factors in a moment.

    ``u`` lists (upper, lower) labels of each U factor U^upper_lower, ``ud``
    the same for each U^+ factor. An integer label is a fixed basis value; a
    string label is a summed index and must appear on exactly two slots.
    ``u_sectors``/``ud_sectors`` optionally give (upper, lower) charge sectors
    per factor for block-Haar moments.
    """

    u: tuple
    ud: tuple
    u_sectors: tuple | None = None
    ud_sectors: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(tuple(x) for x in self.u))
        object.__setattr__(self, "ud", tuple(tuple(x) for x in self.ud))
        for name in ("u_sectors", "ud_sectors"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(tuple(x) for x in v))
        counts = {}
        for lab in self.labels():
            if isinstance(lab, str):
                counts[lab] = counts.get(lab, 0) + 1
        bad = [k for k, c in counts.items() if c != 2]
        if bad:
            raise ValueError(f"summed labels must appear exactly twice: {bad}")

    @property
    def p(self) -> int:
        return len(self.u)

    @property
    def balanced(self) -> bool:
        return len(self.u) == len(self.ud)

    def labels(self):
        for pair in self.u + self.ud:
            yield from pair


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _contract(w: WiringSpec, L, a, b):
    """Product of delta constraints for one (a, b); returns a sympy factor."""
    p = w.p
    # slots: U upper 0..p-1, U lower p..2p-1, U^+ upper 2p..3p-1, U^+ lower 3p..4p-1
    labels = [x[0] for x in w.u] + [x[1] for x in w.u] + [x[0] for x in w.ud] + [x[1] for x in w.ud]
    uf = _UnionFind(4 * p)
    for k in range(p):
        uf.union(k, 3 * p + a[k])          # i_k = j'_{a(k)}
        uf.union(p + k, 2 * p + b[k])      # j_k = i'_{b(k)}
    first = {}
    for s, lab in enumerate(labels):
        if isinstance(lab, str):
            if lab in first:
                uf.union(s, first[lab])
            else:
                first[lab] = s
    fixed = {}
    for s, lab in enumerate(labels):
        if not isinstance(lab, str):
            r = uf.find(s)
            if fixed.setdefault(r, lab) != lab:
                return sp.Integer(0)
    roots = {uf.find(s) for s in range(4 * p)}
    free = sum(1 for r in roots if r not in fixed)
    return L**free


def _check_fixed_range(w, L):
    if L.is_number:
        for lab in w.labels():
            if not isinstance(lab, str) and not 0 <= lab < L:
                raise ValueError(f"fixed index {lab} outside range(0, {L})")


def haar_moment(w, L=L_SYMBOL):
    """Exact Haar average of a wired moment.

    Args:
        w: a :class:`WiringSpec` (entries with labelled indices) or an
            :class:`OperatorWord` (products with inserted operators).
        L: dimension, symbol or integer.

    Returns:
        For a WiringSpec, a sympy rational in L. For an OperatorWord, a
        :class:`TraceExpansion` of trace monomials with rational coefficients.
        Unbalanced moments give zero.
    """
    if isinstance(w, OperatorWord):
        return _word_moment(w, L)
    L = _as_dimension(L)
    if not w.balanced:
        return sp.Integer(0)
    p = w.p
    if p == 0:
        return sp.Integer(1)
    if p > MAX_ORDER:
        raise UnsupportedOrderError(f"moments are supported for p <= {MAX_ORDER}")
    _check_fixed_range(w, L)
    wg = {}
    total = sp.Integer(0)
    for a, b, ct in _pairs(p):
        f = _contract(w, L, a, b)
        if f == 0:
            continue
        if ct not in wg:
            wg[ct] = wg_unitary(ct, L)
        total += f * wg[ct]
    return sp.factor(sp.cancel(total)) if not L.is_number else sp.nsimplify(total)


def u1_haar_moment(w: WiringSpec, dims):
    """Moment over independent Haar blocks, one per charge sector.

    Args:
        w: wiring whose ``u_sectors``/``ud_sectors`` give the sector of every
            index. Index labels are local to their sector.
        dims: mapping sector -> dimension (integer or sympy symbol).

    Returns:
        Product of per-sector Haar moments; zero when a factor connects two
        different sectors or a sector has unequal U and U^+ counts.
    """
    if w.u_sectors is None or w.ud_sectors is None:
        raise ValueError("u1_haar_moment needs sector labels")
    if len(w.u_sectors) != len(w.u) or len(w.ud_sectors) != len(w.ud):
        raise ValueError("one sector pair per factor is required")
    for up, lo in w.u_sectors + w.ud_sectors:
        if up != lo:
            return sp.Integer(0)
    sectors = sorted({s for s, _ in w.u_sectors + w.ud_sectors})
    slot_sector = {}
    for (lab_u, lab_l), (s, _) in zip(w.u + w.ud, w.u_sectors + w.ud_sectors):
        for lab in (lab_u, lab_l):
            if isinstance(lab, str) and slot_sector.setdefault(lab, s) != s:
                raise ValueError(f"summed label {lab!r} spans two sectors")
    total = sp.Integer(1)
    for s in sectors:
        us = [f for f, (q, _) in zip(w.u, w.u_sectors) if q == s]
        uds = [f for f, (q, _) in zip(w.ud, w.ud_sectors) if q == s]
        if len(us) != len(uds):
            return sp.Integer(0)
        d = _as_dimension(dims[s])
        if d.is_number and d == 1:
            # a 1x1 block is a uniform phase; balanced moments average to 1
            if any(not isinstance(lab, str) and lab != 0 for pair in us + uds for lab in pair):
                raise ValueError("fixed index outside a one-dimensional sector")
            continue
        total *= haar_moment(WiringSpec(us, uds), d)
    return sp.factor(total) if not total.is_number else total


# ---------------------------------------------------------------- operator words

@dataclass(frozen=True)
class OperatorWord:
    """A product such as X1 U Y1 U^+ X2 U Y2 U^+.

    ``tokens`` holds "U", "Ud" or operator names; with ``trace`` the product is
    traced.
    """

    tokens: tuple
    trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_pattern(cls, pattern, operators, trace: bool = False) -> "OperatorWord":
        """Interleave operators with a U/U^+ pattern: 1 = U, 2 = U^+.

        ``operators[k]`` is placed in front of the k-th unitary factor.
        """
        if len(pattern) != len(operators):
            raise ValueError("pattern and operator list must have the same length")
        tokens = []
        for code, op in zip(pattern, operators):
            if int(code) not in (1, 2):
                raise ValueError("only U (1) and U^+ (2) factors are supported")
            tokens += [str(op), "U" if int(code) == 1 else "Ud"]
        return cls(tuple(tokens), trace)


@dataclass
class TraceExpansion:
    """sum_k c_k * chain_k * prod Tr[...]; chain is the open operator product."""

    terms: dict = field(default_factory=dict)
    dimension: sp.Basic = L_SYMBOL
    trace: bool = False

    def coefficient(self, chain=(), traces=()) -> sp.Basic:
        key = (tuple(chain), tuple(sorted(_canonical_cycle(c) for c in traces)))
        return self.terms.get(key, sp.Integer(0))

    def expr(self) -> sp.Basic:
        out = sp.Integer(0)
        for (chain, traces), c in self.terms.items():
            out += c * _monomial_symbol(chain, traces)
        return out

    def format(self) -> str:
        if not self.terms:
            return "0"
        num, den = sp.fraction(sp.together(self.expr()))
        chains = sorted({_chain_symbol(ch) for ch, _ in self.terms if ch}, key=str)
        num = sp.expand(num)
        if chains:
            pieces = []
            for cs in chains:
                coeff = sp.factor(num.coeff(cs))
                if coeff != 0:
                    pieces.append(f"{cs}*({coeff})")
            num_s = " + ".join(pieces)
        else:
            num_s = str(sp.factor(num))
        den = sp.factor(den)
        return f"({num_s})/({den})" if den != 1 else num_s

    def evaluate(self, operators: dict, dim: int):
        """Numeric value with ``operators`` mapping names to dim x dim arrays.

        Returns a matrix for open words and a scalar for traced ones.
        """
        import numpy as np

        def product(names):
            m = np.eye(dim, dtype=np.complex128)
            for nm in names:
                m = m @ operators[nm]
            return m

        total = 0 if self.trace else np.zeros((dim, dim), dtype=np.complex128)
        for (chain, traces), c in self.terms.items():
            coeff = complex(c.subs(self.dimension, dim)) if not c.is_number else complex(c)
            for t in traces:
                coeff *= np.trace(product(t))
            total = total + coeff * (product(chain) if not self.trace else 1)
        return total

    def __str__(self):
        return self.format()


def _canonical_cycle(cyc):
    cyc = tuple(cyc)
    if not cyc:
        return cyc
    return min(cyc[i:] + cyc[:i] for i in range(len(cyc)))


def _chain_symbol(chain):
    return sp.Symbol(".".join(chain), commutative=True) if chain else sp.Integer(1)


def _monomial_symbol(chain, traces):
    out = _chain_symbol(chain)
    for t in traces:
        out *= sp.Symbol("Tr[" + ".".join(t) + "]")
    return out


def _word_moment(w: OperatorWord, L) -> TraceExpansion:
    L = _as_dimension(L)
    toks = w.tokens
    n = len(toks)
    upos = [x for x, t in enumerate(toks) if t == "U"]
    dpos = [x for x, t in enumerate(toks) if t == "Ud"]
    out = TraceExpansion(dimension=L, trace=w.trace)
    if len(upos) != len(dpos):
        return out
    p = len(upos)
    if p > MAX_ORDER:
        raise UnsupportedOrderError(f"moments are supported for p <= {MAX_ORDER}")
    uord = {x: k for k, x in enumerate(upos)}
    dord = {x: m for m, x in enumerate(dpos)}
    wg = {}
    for a, b, ct in _pairs(p):
        binv = _inverse(b)

        def jump(x):
            # from the row index of token x to the column end it is tied to
            if toks[x] == "U":
                return dpos[a[uord[x]]]
            return upos[binv[dord[x]]]

        visited = [False] * n
        chain = ()
        if not w.trace:
            ops, x = [], 0
            while True:
                visited[x] = True
                if toks[x] not in ("U", "Ud"):
                    ops.append(toks[x])
                    end = x
                else:
                    end = jump(x)
                if end == n - 1:
                    break
                x = end + 1
            chain = tuple(ops)
        traces, loops = [], 0
        for start in range(n):
            if visited[start]:
                continue
            ops, x = [], start
            while not visited[x]:
                visited[x] = True
                if toks[x] not in ("U", "Ud"):
                    ops.append(toks[x])
                    end = x
                else:
                    end = jump(x)
                x = (end + 1) % n
            if ops:
                traces.append(_canonical_cycle(ops))
            else:
                loops += 1
        if ct not in wg:
            wg[ct] = wg_unitary(ct, L)
        key = (chain, tuple(sorted(traces)))
        out.terms[key] = out.terms.get(key, sp.Integer(0)) + L**loops * wg[ct]
    out.terms = {k: sp.factor(sp.cancel(v)) for k, v in out.terms.items() if sp.cancel(v) != 0}
    return out


# ---------------------------------------------------------------- permutations

MAX_LIS_K = 8


def lis_count(k: int, L: int) -> int:
    """Number of permutations of k elements whose longest increasing
    subsequence has length <= L (the Haar form factor R_2k at dimension L)."""
    k, L = int(k), int(L)
    if not 1 <= k <= MAX_LIS_K:
        raise UnsupportedOrderError(f"lis_count enumerates S_k for 1 <= k <= {MAX_LIS_K}")
    if L < 1:
        raise ValueError("L must be >= 1")
    return int(_kernels.lis_count(k, L))
