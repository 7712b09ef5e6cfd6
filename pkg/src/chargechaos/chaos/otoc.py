"""Out-of-time-ordered correlators.

For a unitary U the dressed operator is B~ = U^+ B U and the k-point OTOC is

    <A1 B~1 ... Ak B~k> = (1/L) Tr(A1 U^+ B1 U ... Ak U^+ Bk U),

averaged over the ensemble. Restricted to a sector the normalization is 1/d_q.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._stats import jackknife_se, leave_one_out_means, mean_and_se
from ..hilbert import BlockMatrix, NotBlockDiagonalError, PauliString, build_charge_basis, \
    embed_blocks, extract_blocks
from ..series import ObservableSeries
from .form_factors import power_sums

MAX_POINTS = 2

_SECTOR_TOL = 1e-10


@dataclass
class OtocResult:
    """Ensemble OTOC and, for charge-conserving inputs, its sector split.

    ``sector_values[p]`` is the sector OTOC <...>_p and ``residual`` the
    largest per-realization gap between the whole-space value and
    sum_p (d_p / L) <...>_p.
    """

    value: complex
    std_error: float
    sector_values: np.ndarray | None = None
    sector_errors: np.ndarray | None = None
    residual: float | None = None
    samples: np.ndarray = field(default=None, repr=False)


def _dense(op, dim: int) -> np.ndarray:
    if isinstance(op, BlockMatrix):
        return embed_blocks(op)
    if isinstance(op, (PauliString, str)):
        p = op if isinstance(op, PauliString) else PauliString(op)
        m = p.matrix()
    else:
        m = np.asarray(op, dtype=np.complex128)
    if m.shape != (dim, dim):
        raise ValueError(f"operator of shape {m.shape} does not act on dimension {dim}")
    return m


def _unitary_parts(u):
    """(dense U, sector blocks or None)."""
    if isinstance(u, BlockMatrix):
        return embed_blocks(u), u
    return np.asarray(u, dtype=np.complex128), None


def _check_points(ops):
    if len(ops) % 2 or not 2 <= len(ops) <= 2 * MAX_POINTS:
        raise ValueError("operators must be A1, B1[, A2, B2] (k = 1 or 2)")


def _word_trace(ops, u):
    """Tr(A1 U^+ B1 U ... ) for dense arrays."""
    ud = u.conj().T
    m = np.eye(u.shape[0], dtype=np.complex128)
    for a, b in zip(ops[0::2], ops[1::2]):
        m = m @ a @ ud @ b @ u
    return np.trace(m)


def otoc(ens, operators, scope="whole") -> OtocResult:
    """Ensemble average of the k-point OTOC (k <= 2).

    Args:
        ens: sequence of unitaries, dense or :class:`BlockMatrix`.
        operators: [A1, B1] or [A1, B1, A2, B2]; dense arrays, Pauli strings or
            block matrices.
        scope: "whole" or a sector index (block ensembles only).

    When every unitary is a block matrix and every operator conserves charge,
    the sector OTOCs are returned and the identity whole = sum_p (d_p/L) sector
    is checked per realization on two independent routes (dense trace versus
    block traces).
    """
    _check_points(operators)
    if len(ens) < 1:
        raise ValueError("empty ensemble")
    u0, b0 = _unitary_parts(ens[0])
    L = u0.shape[0]
    dense_ops = [_dense(op, L) for op in operators]
    blocked = None
    if b0 is not None:
        try:
            blocked = [extract_blocks(a, b0.basis, tol=_SECTOR_TOL) for a in dense_ops]
        except NotBlockDiagonalError:
            blocked = None
    if scope != "whole":
        if blocked is None:
            raise ValueError("sector scope needs a block ensemble and charge-conserving operators")
        q = int(scope)
        if not 0 <= q < b0.basis.n_sectors:
            raise ValueError(f"sector {q} out of range")

    whole, sectors = [], []
    for u in ens:
        dense_u, blocks = _unitary_parts(u)
        whole.append(_word_trace(dense_ops, dense_u) / L)
        if blocked is not None:
            if blocks is None:
                raise ValueError("mixed dense and block unitaries")
            row = []
            for p, up in enumerate(blocks.blocks):
                ops_p = [a.blocks[p] for a in blocked]
                row.append(_word_trace(ops_p, up) / up.shape[0])
            sectors.append(row)
    whole = np.array(whole)
    if blocked is None:
        mean, err = mean_and_se(whole)
        return OtocResult(complex(mean), float(err), samples=whole)

    sectors = np.array(sectors)
    dims = np.array(b0.basis.sector_dims, dtype=float)
    recomposed = sectors @ (dims / L)
    residual = float(np.max(np.abs(whole - recomposed)))
    smean, serr = mean_and_se(sectors)
    if scope == "whole":
        mean, err = mean_and_se(whole)
        samples = whole
    else:
        mean, err, samples = smean[q], serr[q], sectors[:, q]
    return OtocResult(complex(mean), float(err), smean, serr, residual, samples)


# ---------------------------------------------------------------- closed forms

def _tr(m):
    return np.trace(m) / m.shape[0]


def connected(a, b) -> complex:
    """<<AB>> = <AB> - <A><B> with <X> = Tr X / d."""
    return _tr(a @ b) - _tr(a) * _tr(b)


def two_point_invariant(a, b, r2) -> complex:
    """Two-point OTOC of a unitarily invariant ensemble with form factor R2.

    <A B~> = <A><B> + (R2 - 1)/(d^2 - 1) <<AB>>; for d = 1 this is A B.
    """
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    d = a.shape[0]
    if d == 1:
        return complex(a[0, 0] * b[0, 0])
    return _tr(a) * _tr(b) + (r2 - 1) / (d * d - 1) * connected(a, b)


def haar_four_point(a1, b1, a2, b2) -> complex:
    """<A1 B~1 A2 B~2> averaged over Haar unitaries of the operators' dimension."""
    a1, b1, a2, b2 = (np.atleast_2d(x) for x in (a1, b1, a2, b2))
    d = a1.shape[0]
    if d == 1:
        return complex(a1[0, 0] * b1[0, 0] * a2[0, 0] * b2[0, 0])
    ta1, ta2, tb1, tb2 = _tr(a1), _tr(a2), _tr(b1), _tr(b2)
    return (_tr(a1 @ a2) * tb1 * tb2 + ta1 * ta2 * _tr(b1 @ b2) - ta1 * ta2 * tb1 * tb2
            - connected(a1, a2) * connected(b1, b2) / (d * d - 1))


def u1_haar_otoc(operators, basis=None) -> complex:
    """OTOC of the U(1)-symmetric Haar ensemble for charge-conserving operators.

    Sector values are weighted by d_p / L; each sector uses the Haar closed form.
    """
    _check_points(operators)
    blocked = []
    for op in operators:
        if isinstance(op, BlockMatrix):
            blocked.append(op)
            basis = op.basis
    if basis is None:
        raise ValueError("a ChargeBasis is needed for dense operators")
    blocked = [op if isinstance(op, BlockMatrix) else extract_blocks(_dense(op, basis.dim), basis)
               for op in operators]
    total = 0j
    for p, d in enumerate(basis.sector_dims):
        ops = [b.blocks[p] for b in blocked]
        val = two_point_invariant(ops[0], ops[1], 1.0) if len(ops) == 2 else haar_four_point(*ops)
        total += d / basis.dim * val
    return complex(total)


def u1_haar_two_point(a, b, basis) -> complex:
    """<A B~> on the U(1)-symmetric Haar ensemble for arbitrary dense A, B.

    Averaging U^+ B U over independent sector blocks keeps only the
    sector-diagonal parts, each replaced by its normalized trace, so the
    result is (1/L) sum_p Tr(A_pp) Tr(B_pp) / d_p.
    """
    da = np.diagonal(_dense(a, basis.dim))
    db = np.diagonal(_dense(b, basis.dim))
    total = 0j
    for states in basis.sector_states:
        total += da[states].sum() * db[states].sum() / len(states)
    return complex(total / basis.dim)


def pauli_two_point_u1(a, b) -> float:
    """Two-point OTOC of Pauli strings on the U(1)-symmetric Haar ensemble.

    Strings with an X or Y have no diagonal and give 0. For I/Z strings the
    sector traces are Krawtchouk polynomials in the number of Z letters, and
    their orthogonality leaves 1/binomial(D, z) when both strings carry z
    Z letters, and 0 otherwise.
    """
    a = a if isinstance(a, PauliString) else PauliString(a)
    b = b if isinstance(b, PauliString) else PauliString(b)
    if len(a) != len(b):
        raise ValueError("Pauli strings of different length")
    return float(np.real(u1_haar_two_point(a, b, build_charge_basis(len(a)))))


# ---------------------------------------------------------------- time series

def _block_ops(operators, basis):
    out = []
    for op in operators:
        if isinstance(op, BlockMatrix):
            out.append(op)
        elif isinstance(op, (PauliString, str)):
            out.append((op if isinstance(op, PauliString) else PauliString(op)).blocks(basis))
        else:
            out.append(extract_blocks(np.asarray(op, dtype=np.complex128), basis))
    return out


def otoc_series(se, operators, times) -> ObservableSeries:
    """Direct OTOC of U_r(t) = exp(i t H_r) over realizations (needs vectors)."""
    _check_points(operators)
    if se.vectors is None:
        raise ValueError("ensemble was built without eigenvectors")
    basis = se.basis
    ops = _block_ops(operators, basis)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    dims = np.array(basis.sector_dims, dtype=float)
    vals = np.zeros((se.n_realizations, len(times)), dtype=np.complex128)
    o = se.offsets
    for r in range(se.n_realizations):
        for p in range(se.n_sectors):
            v = se.vectors[r][p]
            e = se.eigenvalues[r, o[p]:o[p + 1]]
            # operators in the eigenbasis; U is then diagonal
            rot = [v.conj().T @ op.blocks[p] @ v for op in ops]
            for it, t in enumerate(times):
                vals[r, it] += _word_trace(rot, np.diag(np.exp(1j * t * e))) / basis.dim
    mean, err = mean_and_se(vals)
    return ObservableSeries(times, np.real(mean), mean_and_se(np.real(vals))[1], se.n_realizations,
                            f"OTOC{len(operators) // 2}", {"complex": mean})


def otoc_kinv_approx(se, operators, times, with_direct: bool = True) -> ObservableSeries:
    """Sector form-factor approximation of the k-point OTOC.

    Evaluates sum_p R_2k^{E_p}(t) / (d_p^2k L) Tr(A1_p B1_p ... Ak_p Bk_p) from
    the per-sector form factors. With ``with_direct`` (and stored vectors) the
    direct OTOC of the same realizations goes to ``extra["direct"]`` together
    with the relative deviation ``extra["relative_deviation"]``.
    """
    _check_points(operators)
    k = len(operators) // 2
    basis = build_charge_basis(se.spec.size)
    ops = _block_ops(operators, basis)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ps = power_sums(se, times, 1)
    r2k = np.abs(ps[1]) ** (2 * k)                      # (R, T, S)
    dims = np.array(basis.sector_dims, dtype=float)
    traces = np.empty(se.n_sectors, dtype=np.complex128)
    for p in range(se.n_sectors):
        m = np.eye(basis.sector_dims[p], dtype=np.complex128)
        for op in ops:
            m = m @ op.blocks[p]
        traces[p] = np.trace(m)
    weights = traces / (dims ** (2 * k) * basis.dim)

    def predict(r):
        return np.real(r @ weights)

    value = predict(r2k.mean(0))
    if se.n_realizations > 1:
        err = jackknife_se(predict(leave_one_out_means(r2k)))
    else:
        err = np.zeros_like(value)
    out = ObservableSeries(times, value, err, se.n_realizations, f"OTOC{k}_kinv")
    if with_direct and se.vectors is not None:
        direct = otoc_series(se, operators, times)
        out.extra["direct"] = direct.values
        out.extra["direct_se"] = direct.std_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            out.extra["relative_deviation"] = np.abs(value - direct.values) / np.abs(direct.values)
    return out
