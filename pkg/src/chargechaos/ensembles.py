"""Random unitary and Hamiltonian ensembles with charge conservation.

Samplers for Haar, block (U(1)-symmetric) Haar, per-sector GUE and complex SYK,
plus time evolution and the cached per-sector spectra that every time series
downstream is built from.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import _kernels, rng as rngmod
from .hilbert import BlockMatrix, ChargeBasis, build_charge_basis, sector_dim

KINDS = ("haar", "u1_haar", "gue_per_sector", "csyk")


# ---------------------------------------------------------------- unitaries

def _phase_fixed_qr(z):
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def _ginibre(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_haar_unitary(d: int, rng) -> np.ndarray:
    """One Haar-random d x d unitary (Ginibre + QR with the diagonal phase fix)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    g = rngmod.as_generator(rng)
    return _phase_fixed_qr(_ginibre(g, (d, d)))


def sample_haar_unitaries(d: int, n: int, rng) -> np.ndarray:
    """``n`` independent Haar unitaries stacked as (n, d, d)."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    g = rngmod.as_generator(rng)
    return _phase_fixed_qr(_ginibre(g, (n, d, d)))


def sample_haar_columns(d: int, k: int, n: int, rng) -> np.ndarray:
    """First ``k`` columns of ``n`` Haar unitaries, shape (n, d, k).

    The first k columns of a Haar unitary are distributed as the Q factor of a
    thin QR of a d x k Ginibre matrix, which is much cheaper when k << d.
    """
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    g = rngmod.as_generator(rng)
    return _phase_fixed_qr(_ginibre(g, (n, d, k)))


def sample_u1_haar(basis: ChargeBasis, rng) -> BlockMatrix:
    """Independent Haar unitary on every charge sector."""
    g = rngmod.as_generator(rng)
    children = g.spawn(basis.n_sectors)
    blocks = [sample_haar_unitary(d, c) for d, c in zip(basis.sector_dims, children)]
    return BlockMatrix(basis, blocks, "unitary")


def sample_u1_haar_batch(basis: ChargeBasis, n: int, rng) -> list:
    """``n`` block-Haar samples as a list of (n, d_q, d_q) arrays, one per sector."""
    g = rngmod.as_generator(rng)
    children = g.spawn(basis.n_sectors)
    return [sample_haar_unitaries(d, n, c) for d, c in zip(basis.sector_dims, children)]


# ---------------------------------------------------------------- GUE

def sample_gue(d: int, rng, scale: float = 1.0, n: int | None = None) -> np.ndarray:
    """GUE matrix with entry variance scale^2/d (spectral radius ~ 2*scale)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    g = rngmod.as_generator(rng)
    shape = (d, d) if n is None else (n, d, d)
    a = _ginibre(g, shape)
    h = (a + np.swapaxes(a.conj(), -1, -2)) / 2.0
    return h * (np.sqrt(2.0) * scale / np.sqrt(d))


def sample_gue_blocks(basis: ChargeBasis, rng, scale: float = 1.0) -> BlockMatrix:
    """Independent GUE block on every sector."""
    g = rngmod.as_generator(rng)
    children = g.spawn(basis.n_sectors)
    blocks = [sample_gue(d, c, scale) for d, c in zip(basis.sector_dims, children)]
    return BlockMatrix(basis, blocks, "hermitian")


# ---------------------------------------------------------------- complex SYK

@dataclass(frozen=True, eq=False)
class SykCouplings:
    """Couplings J_ijkl of the complex SYK model.

    ``pairs`` is the hermitian matrix J[(i<j), (k<l)] over ordered mode pairs;
    the full antisymmetric tensor is derived from it on demand.
    """

    N: int
    J: float
    pairs: np.ndarray

    @property
    def tensor(self) -> np.ndarray:
        N = self.N
        t = np.zeros((N, N, N, N), dtype=np.complex128)
        plist = list(combinations(range(N), 2))
        for a, (i, j) in enumerate(plist):
            for b, (k, l) in enumerate(plist):
                v = self.pairs[a, b]
                t[i, j, k, l] = v
                t[j, i, k, l] = -v
                t[i, j, l, k] = -v
                t[j, i, l, k] = v
        return t


def _check_syk_n(N):
    if N % 2 or not 4 <= N <= 14:
        raise ValueError(f"N must be even with 4 <= N <= 14, got {N}")


def sample_syk_couplings(N: int, J: float, rng) -> SykCouplings:
    """Draw J_ijkl on the independent pairs (i<j) <= (k<l), fill the rest.

    Off-diagonal pairs are complex with E|J|^2 = 4 J^2 / N^3; diagonal pairs
    (i,j)=(k,l) are real with the same variance.
    """
    _check_syk_n(N)
    g = rngmod.as_generator(rng)
    P = N * (N - 1) // 2
    var = 4.0 * J * J / N**3
    iu = np.triu_indices(P, k=1)
    m = len(iu[0])
    re = g.standard_normal(m)
    im = g.standard_normal(m)
    diag = g.standard_normal(P)
    pairs = np.zeros((P, P), dtype=np.complex128)
    pairs[iu] = (re + 1j * im) * np.sqrt(var / 2.0)
    pairs = pairs + pairs.conj().T
    pairs[np.diag_indices(P)] = diag * np.sqrt(var)
    pairs.setflags(write=False)
    return SykCouplings(int(N), float(J), pairs)


@dataclass(frozen=True, eq=False)
class _SykTable:
    target: np.ndarray    # flat position in the concatenated block buffer
    cidx: np.ndarray      # flat index into the (P, P) pair matrix
    coef: np.ndarray      # 4 * fermionic sign
    block_offsets: np.ndarray
    size: int


def _apply_annihilate(states, valid, sign, mode, N):
    bit = N - 1 - mode
    occ = (states >> bit) & 1
    valid = valid & (occ == 1)
    parity = _popcount(states >> (bit + 1)) & 1
    sign = sign * np.where(parity == 1, -1, 1)
    return states & ~(1 << bit), valid, sign


def _apply_create(states, valid, sign, mode, N):
    bit = N - 1 - mode
    occ = (states >> bit) & 1
    valid = valid & (occ == 0)
    parity = _popcount(states >> (bit + 1)) & 1
    sign = sign * np.where(parity == 1, -1, 1)
    return states | (1 << bit), valid, sign


def _popcount(x):
    x = x.copy()
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


@lru_cache(maxsize=8)
def syk_transition_table(N: int) -> _SykTable:
    """Nonzero matrix elements of 4 f_i^+ f_j^+ f_k f_l for i<j, k<l.

    Modes are numbered from the leftmost qubit; f_i carries the sign
    (-1)^(occupied modes left of i). Every transition is checked to stay inside
    one charge sector, so [H, Q] = 0 holds by construction.
    """
    _check_syk_n(N)
    basis = build_charge_basis(N)
    plist = list(combinations(range(N), 2))
    P = len(plist)
    states = np.arange(1 << N, dtype=np.int64)
    dims = np.array(basis.sector_dims, dtype=np.int64)
    block_offsets = np.concatenate([[0], np.cumsum(dims * dims)])
    targets, cidx, coef = [], [], []
    ones = np.ones(len(states), dtype=bool)
    sgn0 = np.ones(len(states), dtype=np.int64)
    for b, (k, l) in enumerate(plist):
        s1, v1, g1 = _apply_annihilate(states, ones, sgn0, l, N)
        s1, v1, g1 = _apply_annihilate(s1, v1, g1, k, N)
        src, mid, gmid = states[v1], s1[v1], g1[v1]
        if len(src) == 0:
            continue
        for a, (i, j) in enumerate(plist):
            s2, v2, g2 = _apply_create(mid, np.ones(len(mid), dtype=bool), gmid, j, N)
            s2, v2, g2 = _apply_create(s2, v2, g2, i, N)
            if not v2.any():
                continue
            dst, s_src, g = s2[v2], src[v2], g2[v2]
            q = basis.charges[s_src]
            if np.any(basis.charges[dst] != q):
                raise AssertionError("SYK term changes the charge")
            row = basis.ranks[dst]
            col = basis.ranks[s_src]
            targets.append(block_offsets[q] + row * dims[q] + col)
            cidx.append(np.full(len(dst), a * P + b, dtype=np.int64))
            coef.append(4.0 * g)
    table = _SykTable(
        np.concatenate(targets).astype(np.int64),
        np.concatenate(cidx).astype(np.int64),
        np.concatenate(coef).astype(np.float64),
        block_offsets.astype(np.int64),
        int(block_offsets[-1]),
    )
    return table


def build_syk_hamiltonian(c: SykCouplings) -> BlockMatrix:
    """H = sum_ijkl J_ijkl f_i^+ f_j^+ f_k f_l as charge blocks (no mass term)."""
    table = syk_transition_table(c.N)
    basis = build_charge_basis(c.N)
    flat = _kernels.syk_assemble(np.ascontiguousarray(c.pairs.ravel()), table.target,
                                 table.cidx, table.coef, table.size)
    blocks = []
    for q, d in enumerate(basis.sector_dims):
        blocks.append(flat[table.block_offsets[q]:table.block_offsets[q + 1]].reshape(d, d))
    return BlockMatrix(basis, blocks, "hermitian")


# ---------------------------------------------------------------- dynamics

def block_eigh(h: BlockMatrix):
    """Per-sector (eigenvalues ascending, eigenvectors)."""
    out = []
    for b in h.blocks:
        try:
            out.append(np.linalg.eigh(b))
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
    return out


def _eigvalsh(b):
    try:
        return np.linalg.eigvalsh(b)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc


def evolve(h: BlockMatrix, t: float) -> BlockMatrix:
    """exp(+i t H) computed per block from the eigendecomposition."""
    blocks = []
    for w, v in block_eigh(h):
        blocks.append((v * np.exp(1j * t * w)) @ v.conj().T)
    return BlockMatrix(h.basis, blocks, "unitary")


def unitary_eigh(u: np.ndarray):
    """Eigenphases (sorted) and orthonormal eigenvectors of a unitary."""
    w, v = np.linalg.eig(u)
    ph = np.angle(w)
    order = np.argsort(ph, kind="stable")
    ph, v = ph[order], v[:, order]
    # re-orthonormalize; columns only pick up phases
    qv, r = np.linalg.qr(v)
    qv = qv * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return ph, qv


# ---------------------------------------------------------------- ensembles

@dataclass(frozen=True)
class EnsembleSpec:
    """Which ensemble to sample.

    ``size`` is the qubit count D (for csyk, the number of Dirac fermions N;
    for haar, L = 2^D). ``J`` is used by csyk, ``scale`` by gue_per_sector.
    """

    kind: str
    size: int
    seed: int = 0
    realizations: int = 1
    J: float = 1.0
    scale: float = 1.0

    def validate(self) -> list:
        errs = []
        if self.kind not in KINDS:
            errs.append(("ensemble.kind", f"unknown kind {self.kind!r}; expected one of {KINDS}"))
        if self.realizations < 1:
            errs.append(("ensemble.realizations", "must be >= 1"))
        if self.kind == "csyk":
            if self.size % 2 or not 4 <= self.size <= 14:
                errs.append(("ensemble.n", f"csyk needs even N in [4, 14], got {self.size}"))
            if not self.J > 0:
                errs.append(("ensemble.J", "must be positive"))
        elif not 1 <= self.size <= 14:
            errs.append(("ensemble.n", f"size must be in [1, 14], got {self.size}"))
        if self.kind == "gue_per_sector" and not self.scale > 0:
            errs.append(("ensemble.scale", "must be positive"))
        if not 0 <= self.seed < 2**64:
            errs.append(("ensemble.seed", "must be a 64-bit unsigned integer"))
        return errs

    def key(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class SpectralEnsemble:
    """Sorted per-sector eigenvalues for each realization.

    ``eigenvalues`` has shape (R, L) with sectors concatenated in charge order.
    For the unitary kinds the values are eigenphases, so evolving to t = 1
    recovers the sampled unitary.
    """

    spec: EnsembleSpec
    sector_dims: tuple
    eigenvalues: np.ndarray
    vectors: tuple | None = None

    @property
    def n_realizations(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def L(self) -> int:
        return int(sum(self.sector_dims))

    @property
    def n_sectors(self) -> int:
        return len(self.sector_dims)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sector_dims)]).astype(np.int64)

    @property
    def basis(self) -> ChargeBasis | None:
        if self.spec.kind == "haar":
            return None
        return build_charge_basis(self.spec.size)

    def sector(self, q: int) -> np.ndarray:
        o = self.offsets
        return self.eigenvalues[:, o[q]:o[q + 1]]

    def per_sector(self, r: int) -> list:
        o = self.offsets
        return [self.eigenvalues[r, o[q]:o[q + 1]] for q in range(self.n_sectors)]

    def unitary_blocks(self, r: int, t: float) -> list:
        """Blocks of U_r(t) = V exp(i t E) V^+ (needs ``keep_vectors``)."""
        if self.vectors is None:
            raise ValueError("ensemble was built without eigenvectors")
        out = []
        for e, v in zip(self.per_sector(r), self.vectors[r]):
            out.append((v * np.exp(1j * t * e)) @ v.conj().T)
        return out

    def save(self, path) -> None:
        np.savez(path, eigenvalues=self.eigenvalues,
                 sector_dims=np.array(self.sector_dims, dtype=np.int64),
                 spec=json.dumps(asdict(self.spec), sort_keys=True))

    @classmethod
    def load(cls, path) -> "SpectralEnsemble":
        with np.load(path) as f:
            spec = EnsembleSpec(**json.loads(str(f["spec"])))
            return cls(spec, tuple(int(d) for d in f["sector_dims"]), f["eigenvalues"].copy())


def _realization(spec: EnsembleSpec, r: int, keep_vectors: bool):
    kind, seed = spec.kind, spec.seed
    if kind == "csyk":
        c = sample_syk_couplings(spec.size, spec.J, rngmod.substream(seed, rngmod.SYK, r))
        h = build_syk_hamiltonian(c)
        pieces = block_eigh(h) if keep_vectors else [(_eigvalsh(b), None) for b in h.blocks]
    elif kind == "gue_per_sector":
        pieces = []
        for q in range(spec.size + 1):
            d = sector_dim(spec.size, q)
            h = sample_gue(d, rngmod.substream(seed, rngmod.GUE, r, q), spec.scale)
            pieces.append(np.linalg.eigh(h) if keep_vectors else (_eigvalsh(h), None))
    elif kind == "u1_haar":
        pieces = []
        for q in range(spec.size + 1):
            d = sector_dim(spec.size, q)
            u = sample_haar_unitary(d, rngmod.substream(seed, rngmod.UNITARY, r, q))
            pieces.append(unitary_eigh(u))
    elif kind == "haar":
        u = sample_haar_unitary(1 << spec.size, rngmod.substream(seed, rngmod.UNITARY, r, 0))
        pieces = [unitary_eigh(u)]
    else:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    vals = np.concatenate([p[0] for p in pieces])
    vecs = tuple(p[1] for p in pieces) if keep_vectors else None
    return vals, vecs


def spectral_ensemble(spec: EnsembleSpec, keep_vectors: bool = False,
                      workers: int | None = None, cache_dir=None) -> SpectralEnsemble:
    """Sample ``spec.realizations`` draws and diagonalize each sector once.

    Results depend only on ``spec`` (not on ``workers``). With ``cache_dir``
    the eigenvalues are stored as ``<sha256 of spec>.npz`` and reused.
    """
    errs = spec.validate()
    if errs:
        raise ValueError("; ".join(f"{f}: {m}" for f, m in errs))
    if spec.kind == "haar":
        dims = (1 << spec.size,)
    else:
        dims = build_charge_basis(spec.size).sector_dims
    path = None
    if cache_dir is not None and not keep_vectors:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, spec.key() + ".npz")
        if os.path.exists(path):
            return SpectralEnsemble.load(path)
    results = rngmod.ordered_map(lambda r: _realization(spec, r, keep_vectors),
                                 range(spec.realizations), workers)
    eig = np.stack([v for v, _ in results])
    eig.setflags(write=False)
    vecs = tuple(v for _, v in results) if keep_vectors else None
    se = SpectralEnsemble(spec, tuple(dims), eig, vecs)
    if path is not None:
        se.save(path)
    return se
