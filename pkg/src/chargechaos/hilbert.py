"""Charge sectors of a qubit register.

The charge operator counts qubits in |1>, so the sector of a computational
basis state is the popcount of its index. Qubit 1 is the most significant bit.
Inside a sector, states are ordered by ascending global index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 20
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12
BLOCK_TOL = 1e-10

_INT64_MAX = 2**63 - 1


class NotBlockDiagonalError(ValueError):
    """Raised when an operator has weight between different charge sectors."""


@lru_cache(maxsize=None)
def _pascal_row(n: int) -> tuple:
    row = [1]
    for _ in range(n):
        nxt = [1]
        for a, b in zip(row, row[1:]):
            v = a + b
            if v > _INT64_MAX:
                raise OverflowError(f"binomial coefficient overflows 64 bits at n={n}")
            nxt.append(v)
        nxt.append(1)
        row = nxt
    return tuple(row)


def sector_dim(D: int, q: int) -> int:
    """Dimension binomial(D, q) of charge sector q on D qubits."""
    D, q = int(D), int(q)
    if D < 0 or q < 0 or q > D:
        raise ValueError(f"sector q={q} out of range for D={D}")
    return _pascal_row(D)[q]


@dataclass(frozen=True, eq=False)
class ChargeBasis:
    """Bijection between global basis indices and (sector, index) pairs."""

    D: int
    sector_dims: tuple
    charges: np.ndarray          # charge of each global index
    ranks: np.ndarray            # position of each global index inside its sector
    sector_states: tuple         # per sector, ascending global indices

    @property
    def dim(self) -> int:
        return 1 << self.D

    @property
    def n_sectors(self) -> int:
        return self.D + 1

    @property
    def offsets(self) -> np.ndarray:
        """Start of each sector in the concatenated (sector-ordered) layout."""
        return np.concatenate([[0], np.cumsum(self.sector_dims)]).astype(np.int64)

    def global_to_sector(self, b: int) -> tuple:
        if not 0 <= b < self.dim:
            raise ValueError(f"global index {b} out of range")
        return int(self.charges[b]), int(self.ranks[b])

    def sector_to_global(self, q: int, i: int) -> int:
        if not 0 <= q <= self.D or not 0 <= i < self.sector_dims[q]:
            raise ValueError(f"({q}, {i}) is not a valid sector index")
        return int(self.sector_states[q][i])

    def __repr__(self):
        return f"ChargeBasis(D={self.D}, sector_dims={list(self.sector_dims)})"


@lru_cache(maxsize=None)
def build_charge_basis(D: int) -> ChargeBasis:
    """Build the charge-sector bookkeeping for ``D`` qubits (1 <= D <= 20)."""
    D = int(D)
    if not 1 <= D <= MAX_QUBITS:
        raise ValueError(f"D must be in [1, {MAX_QUBITS}], got {D}")
    idx = np.arange(1 << D, dtype=np.int64)
    charges = np.zeros(1 << D, dtype=np.int64)
    for bit in range(D):
        charges += (idx >> bit) & 1
    ranks = np.empty(1 << D, dtype=np.int64)
    states = []
    for q in range(D + 1):
        members = np.flatnonzero(charges == q)
        ranks[members] = np.arange(len(members))
        members.setflags(write=False)
        states.append(members)
    charges.setflags(write=False)
    ranks.setflags(write=False)
    dims = tuple(sector_dim(D, q) for q in range(D + 1))
    return ChargeBasis(D, dims, charges, ranks, tuple(states))


class BlockMatrix:
    """Block-diagonal operator, one dense block per charge sector.

    ``flavor`` is one of "unitary", "hermitian" or "general"; the first two are
    checked on construction.
    """

    FLAVORS = ("unitary", "hermitian", "general")

    def __init__(self, basis: ChargeBasis, blocks, flavor: str = "general", check: bool = True):
        if flavor not in self.FLAVORS:
            raise ValueError(f"unknown flavor {flavor!r}")
        if len(blocks) != basis.n_sectors:
            raise ValueError("one block per sector is required")
        out = []
        for q, b in enumerate(blocks):
            b = np.array(b, dtype=np.complex128)
            d = basis.sector_dims[q]
            if b.shape != (d, d):
                raise ValueError(f"block {q} has shape {b.shape}, expected {(d, d)}")
            b.setflags(write=False)
            out.append(b)
        self.basis = basis
        self.blocks = tuple(out)
        self.flavor = flavor
        if check:
            self._check()

    def _check(self):
        for q, b in enumerate(self.blocks):
            if self.flavor == "unitary":
                dev = np.max(np.abs(b @ b.conj().T - np.eye(len(b))))
                if dev > UNITARY_TOL:
                    raise ValueError(f"block {q} is not unitary (deviation {dev:.2e})")
            elif self.flavor == "hermitian":
                dev = np.max(np.abs(b - b.conj().T))
                if dev > HERMITIAN_TOL:
                    raise ValueError(f"block {q} is not hermitian (deviation {dev:.2e})")

    def dagger(self) -> "BlockMatrix":
        return BlockMatrix(self.basis, [b.conj().T for b in self.blocks], self.flavor, check=False)

    def __matmul__(self, other: "BlockMatrix") -> "BlockMatrix":
        if other.basis.D != self.basis.D:
            raise ValueError("basis mismatch")
        flavor = "unitary" if self.flavor == other.flavor == "unitary" else "general"
        return BlockMatrix(self.basis, [a @ b for a, b in zip(self.blocks, other.blocks)],
                           flavor, check=False)

    def sector_traces(self) -> np.ndarray:
        return np.array([np.trace(b) for b in self.blocks])

    def trace(self) -> complex:
        return complex(self.sector_traces().sum())

    def __repr__(self):
        return f"BlockMatrix(D={self.basis.D}, flavor={self.flavor!r})"


def embed_blocks(m: BlockMatrix) -> np.ndarray:
    """Dense 2^D matrix with the blocks placed on their sectors."""
    basis = m.basis
    out = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for states, b in zip(basis.sector_states, m.blocks):
        out[np.ix_(states, states)] = b
    return out


def extract_blocks(M, basis: ChargeBasis, flavor: str = "general",
                   tol: float = BLOCK_TOL) -> BlockMatrix:
    """Split a charge-conserving dense matrix into sector blocks.

    Raises:
        NotBlockDiagonalError: if any entry between different sectors exceeds
            ``tol`` in absolute value.
    """
    M = np.asarray(M)
    if M.shape != (basis.dim, basis.dim):
        raise ValueError(f"matrix shape {M.shape} does not match 2^{basis.D}")
    same = basis.charges[:, None] == basis.charges[None, :]
    off = np.abs(np.where(same, 0, M))
    if off.size and off.max() > tol:
        raise NotBlockDiagonalError(f"off-sector weight {off.max():.3e} exceeds {tol:g}")
    blocks = [M[np.ix_(s, s)] for s in basis.sector_states]
    return BlockMatrix(basis, blocks, flavor)


_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    # Z|0> = -|0>, so (1 + Z)/2 projects on |1> and the charge counts ones
    "Z": np.array([[-1, 0], [0, 1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        letters = self.letters.upper()
        if any(c not in _PAULI for c in letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    @property
    def diagonal(self) -> bool:
        return all(c in "IZ" for c in self.letters)

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=np.complex128)
        for c in self.letters:
            out = np.kron(out, _PAULI[c])
        return out

    def blocks(self, basis: ChargeBasis) -> BlockMatrix:
        """Sector blocks; only strings of I and Z conserve charge."""
        if len(self) != basis.D:
            raise ValueError("Pauli string length does not match D")
        if not self.diagonal:
            raise NotBlockDiagonalError(f"{self.letters} does not conserve charge")
        diag = np.ones(basis.dim)
        idx = np.arange(basis.dim)
        for pos, c in enumerate(self.letters):
            if c == "Z":
                bit = (idx >> (basis.D - 1 - pos)) & 1
                diag = diag * np.where(bit == 1, 1.0, -1.0)
        blocks = [np.diag(diag[s]).astype(np.complex128) for s in basis.sector_states]
        return BlockMatrix(basis, blocks, "hermitian")


def pauli_charge_profile(p) -> tuple:
    """(number of Z letters, number of I letters)."""
    letters = p.letters if isinstance(p, PauliString) else PauliString(str(p)).letters
    return letters.count("Z"), letters.count("I")
