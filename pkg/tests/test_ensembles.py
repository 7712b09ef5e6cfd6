import numpy as np
import pytest
from scipy import stats

from chargechaos import rng as rngmod
from chargechaos.ensembles import (EnsembleSpec, SpectralEnsemble, SykCouplings,
                                   build_syk_hamiltonian, evolve, sample_gue,
                                   sample_gue_blocks, sample_haar_unitaries,
                                   sample_haar_unitary, sample_syk_couplings,
                                   sample_u1_haar, sample_u1_haar_batch,
                                   spectral_ensemble, syk_transition_table)
from chargechaos.hilbert import build_charge_basis, embed_blocks

from oracles import syk_dense_bruteforce


def test_haar_unitarity_and_d1_phase():
    u = sample_haar_unitary(7, 1)
    assert np.max(np.abs(u @ u.conj().T - np.eye(7))) < 1e-10
    u1 = sample_haar_unitaries(1, 20000, 2)[:, 0, 0]
    assert np.allclose(np.abs(u1), 1)
    # uniform phase: circular mean and second moment vanish
    assert abs(u1.mean()) < 5 / np.sqrt(20000)
    assert abs((u1**2).mean()) < 5 / np.sqrt(20000)


def test_haar_first_moment():
    n, d = 100000, 4
    U = sample_haar_unitaries(d, n, 5)
    A = U.reshape(n, d * d)
    m = A.T @ A.conj() / n          # E[U_ij conj(U_kl)]
    se = np.sqrt(np.maximum((np.abs(A) ** 2).T @ (np.abs(A) ** 2) / n - np.abs(m) ** 2, 0) / n)
    expected = np.eye(d * d) / d     # (1/d) delta_ik delta_jl
    assert np.all(np.abs(m - expected) <= 5 * se + 1e-15)


def test_haar_trace_second_moment():
    n = 100000
    tr = np.trace(sample_haar_unitaries(8, n, 6), axis1=1, axis2=2)
    x = np.abs(tr) ** 2
    assert abs(x.mean() - 1) < 5 * x.std(ddof=1) / np.sqrt(n)


def test_u1_haar_d1_and_trace_moment():
    b1 = build_charge_basis(1)
    u = sample_u1_haar(b1, 3)
    assert u.blocks[0].shape == (1, 1) and abs(abs(u.blocks[0][0, 0]) - 1) < 1e-12
    assert abs(u.blocks[0][0, 0] - u.blocks[1][0, 0]) > 1e-6
    n = 100000
    blocks = sample_u1_haar_batch(build_charge_basis(4), n, 7)
    tr = sum(np.trace(b, axis1=1, axis2=2) for b in blocks)
    x = np.abs(tr) ** 2
    assert abs(x.mean() - 5) < 5 * x.std(ddof=1) / np.sqrt(n)


def test_u1_haar_mixed_sector_moment_vanishes():
    n = 100000
    blocks = sample_u1_haar_batch(build_charge_basis(3), n, 8)
    # U^{(1,0)}_{(1,0)} conj(U^{(2,0)}_{(2,0)}) averages to zero
    x = blocks[1][:, 0, 0] * np.conj(blocks[2][:, 0, 0])
    se = np.sqrt(np.var(x.real) + np.var(x.imag)) / np.sqrt(n)
    assert abs(x.mean()) < 5 * se
    # same sector: (1/d) delta delta
    y = np.abs(blocks[1][:, 0, 1]) ** 2
    assert abs(y.mean() - 1 / 3) < 5 * y.std() / np.sqrt(n)


def test_gue_blocks():
    b = build_charge_basis(3)
    h = sample_gue_blocks(b, 4, scale=1.5)
    assert h.blocks[0].shape == (1, 1) and h.blocks[0][0, 0].imag == 0
    for blk in h.blocks:
        assert np.array_equal(blk, blk.conj().T)


def test_gue_semicircle():
    d, scale = 252, 1.0
    ev = np.concatenate([np.linalg.eigvalsh(sample_gue(d, rngmod.substream(9, r), scale))
                         for r in range(200)])

    def cdf(x):
        x = np.clip(x / (2 * scale), -1, 1)
        return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi

    assert stats.kstest(ev, cdf).statistic < 0.05
    assert ev.min() > -2.2 * scale and ev.max() < 2.2 * scale


def test_syk_coupling_constraints():
    c = sample_syk_couplings(6, 1.0, 1)
    t = c.tensor
    assert np.array_equal(t, -t.transpose(1, 0, 2, 3))
    assert np.array_equal(t, -t.transpose(0, 1, 3, 2))
    assert np.array_equal(t, t.transpose(2, 3, 0, 1).conj())
    for i in range(6):
        assert not t[i, i].any()


def test_syk_coupling_variance():
    N, J = 8, 1.3
    vals, diag = [], []
    for r in range(30):
        c = sample_syk_couplings(N, J, rngmod.substream(1, r))
        iu = np.triu_indices(c.pairs.shape[0], k=1)
        vals.append(c.pairs[iu])
        diag.append(np.diag(c.pairs))
    x = np.abs(np.concatenate(vals)) ** 2
    assert len(x) >= 10000
    target = 4 * J * J / N**3
    assert abs(x.mean() - target) < 5 * x.std() / np.sqrt(len(x))
    dg = np.concatenate(diag)
    assert np.all(dg.imag == 0)
    y = dg.real**2
    assert abs(y.mean() - target) < 5 * y.std() / np.sqrt(len(y))


def test_syk_odd_n_rejected():
    with pytest.raises(ValueError):
        sample_syk_couplings(5, 1.0, 0)


@pytest.mark.parametrize("N", [4, 6])
def test_syk_matches_bruteforce_jordan_wigner(N):
    c = sample_syk_couplings(N, 1.0, 17)
    dense = syk_dense_bruteforce(c.tensor)
    h = build_syk_hamiltonian(c)
    assert np.max(np.abs(embed_blocks(h) - dense)) < 1e-12
    # the brute-force matrix has no weight between sectors at all
    ch = build_charge_basis(N).charges
    assert np.all(dense[ch[:, None] != ch[None, :]] == 0)


def test_syk_low_sectors_are_zero():
    for N in (4, 6, 8):
        h = build_syk_hamiltonian(sample_syk_couplings(N, 1.0, N))
        assert not h.blocks[0].any() and not h.blocks[1].any()
        assert np.all(np.linalg.eigvalsh(h.blocks[1]) == 0)


def test_syk_transitions_conserve_charge():
    table = syk_transition_table(6)
    b = build_charge_basis(6)
    dims = np.array(b.sector_dims)
    q = np.searchsorted(table.block_offsets, table.target, side="right") - 1
    local = table.target - table.block_offsets[q]
    row, col = local // dims[q], local % dims[q]
    g_row = np.array([b.sector_to_global(a, r) for a, r in zip(q, row)])
    g_col = np.array([b.sector_to_global(a, c) for a, c in zip(q, col)])
    assert np.array_equal(b.charges[g_row], b.charges[g_col])


def test_syk_single_coupling_spectrum():
    # J_1234 = c and its partners: H = 4 (c f1+ f2+ f3 f4 + h.c.)
    P = 6
    c = 0.3 + 0.4j
    pairs = np.zeros((P, P), dtype=complex)
    pairs[0, 5] = c                      # (1,2) x (3,4)
    pairs[5, 0] = np.conj(c)
    h = build_syk_hamiltonian(SykCouplings(4, 1.0, pairs))
    ev = np.linalg.eigvalsh(h.blocks[2])
    assert np.allclose(ev, [-4 * abs(c), 0, 0, 0, 0, 4 * abs(c)], atol=1e-14)
    t = np.zeros((4, 4, 4, 4), dtype=complex)
    t[0, 1, 2, 3] = t[1, 0, 3, 2] = c
    t[1, 0, 2, 3] = t[0, 1, 3, 2] = -c
    t[2, 3, 0, 1] = t[3, 2, 1, 0] = np.conj(c)
    t[3, 2, 0, 1] = t[2, 3, 1, 0] = -np.conj(c)
    dense = syk_dense_bruteforce(t)
    b = build_charge_basis(4)
    s = b.sector_states[2]
    assert np.allclose(np.linalg.eigvalsh(dense[np.ix_(s, s)]), ev, atol=1e-14)


def test_syk_hermitian_and_trace():
    c = sample_syk_couplings(8, 1.0, 2)
    h = build_syk_hamiltonian(c)
    for blk in h.blocks:
        assert np.max(np.abs(blk - blk.conj().T)) < 1e-12
    dense = embed_blocks(h)
    assert abs(np.trace(dense) - sum(np.trace(b) for b in h.blocks)) < 1e-10


def test_evolve_properties():
    h = sample_gue_blocks(build_charge_basis(4), 3)
    u0 = evolve(h, 0.0)
    for blk in u0.blocks:
        assert np.allclose(blk, np.eye(len(blk)), atol=1e-12)
    prod = evolve(h, 0.7) @ evolve(h, -0.7)
    for blk in prod.blocks:
        assert np.max(np.abs(blk - np.eye(len(blk)))) < 1e-9
    u = evolve(h, 1.3)
    for hb, ub in zip(h.blocks, u.blocks):
        ph = np.sort(np.angle(np.linalg.eigvals(ub)))
        expected = np.sort(np.angle(np.exp(1j * 1.3 * np.linalg.eigvalsh(hb))))
        assert np.allclose(ph, expected, atol=1e-9)


def test_evolve_sign_convention():
    h = sample_gue_blocks(build_charge_basis(2), 1)
    u = evolve(h, 0.5)
    w, v = np.linalg.eigh(h.blocks[1])
    assert np.allclose(u.blocks[1] @ v[:, 0], np.exp(0.5j * w[0]) * v[:, 0])


def test_spectral_ensemble_shapes_and_determinism():
    spec = EnsembleSpec("csyk", 6, seed=42, realizations=10)
    se = spectral_ensemble(spec)
    assert se.eigenvalues.shape == (10, 64) and se.n_sectors == 7
    for q in range(7):
        blk = se.sector(q)
        assert np.all(np.diff(blk, axis=1) >= 0)
    again = spectral_ensemble(spec, workers=3)
    assert np.array_equal(se.eigenvalues, again.eigenvalues)
    gue = spectral_ensemble(EnsembleSpec("gue_per_sector", 6, realizations=2))
    assert [gue.sector(q).shape[1] for q in range(7)] == [1, 6, 15, 20, 15, 6, 1]


def test_spectral_ensemble_cache(tmp_path):
    spec = EnsembleSpec("u1_haar", 4, seed=3, realizations=4)
    a = spectral_ensemble(spec, cache_dir=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1 and files[0].name == spec.key() + ".npz"
    b = spectral_ensemble(spec, cache_dir=tmp_path)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    loaded = SpectralEnsemble.load(files[0])
    assert loaded.spec == spec


def test_unitary_ensemble_vectors_reconstruct():
    spec = EnsembleSpec("u1_haar", 3, seed=1, realizations=2)
    se = spectral_ensemble(spec, keep_vectors=True)
    blocks = se.unitary_blocks(1, 1.0)
    u = sample_haar_unitary(3, rngmod.substream(1, rngmod.UNITARY, 1, 1))
    assert np.allclose(blocks[1], u, atol=1e-10)


def test_spec_validation():
    assert EnsembleSpec("csyk", 8).validate() == []
    assert EnsembleSpec("csyk", 7).validate()[0][0] == "ensemble.n"
    assert EnsembleSpec("u1_haar", 4, realizations=0).validate()[0][0] == "ensemble.realizations"
