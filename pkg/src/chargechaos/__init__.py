"""Chaos and decoupling diagnostics for U(1)-charged random unitary ensembles."""
from . import chaos, decoupling, ensembles, weingarten
from ._kernels import BACKEND
from .hilbert import (BlockMatrix, ChargeBasis, NotBlockDiagonalError, PauliString,
                      build_charge_basis, embed_blocks, extract_blocks,
                      pauli_charge_profile, sector_dim)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlockMatrix", "ChargeBasis", "NotBlockDiagonalError", "PauliString",
    "build_charge_basis", "embed_blocks", "extract_blocks", "pauli_charge_profile",
    "sector_dim", "chaos", "decoupling", "ensembles", "weingarten",
]
