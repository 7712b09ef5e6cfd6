import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from chargechaos.decoupling import (SATURATED, DecouplingReport, HpConfig, cmi2_from_purities,
                                    decoupling_margin, decoupling_report, eastin_knill_bound,
                                    ek_consistency_check, g_function, haar_hp_purity_ac,
                                    haar_page_purity, hp_cmi2, hp_cmi2_exact, hp_cmi2_haar,
                                    hp_monte_carlo, hp_purities, hp_purities_exact,
                                    hp_purity_samples, kl_statistics, kl_variance_slope,
                                    page_purity_analytic, page_purity_mc, product_state,
                                    small_charge_crossover, small_charge_profile)
from chargechaos.ensembles import sample_haar_unitaries
from chargechaos.hilbert import PauliString


def brute_g(na, nb, q):
    # count pairs of basis states of AB with charge q sharing their A part,
    # weighted by the number of B partners: sum over A states a of n_B(q - |a|)^2
    from itertools import product as prod
    total = 0
    for bits in prod((0, 1), repeat=na):
        k = q - sum(bits)
        if 0 <= k <= nb:
            total += math.comb(nb, k) ** 2
    return total


# ---------------------------------------------------------------- G-function

def test_g_examples():
    assert g_function(3, 4, 0) == 1
    assert g_function(2, 2, 2) == 10
    with pytest.raises(ValueError):
        g_function(2, 2, 5)


def test_g_brute_force_and_vandermonde():
    for na, nb in product(range(0, 6), repeat=2):
        for q in range(na + nb + 1):
            assert g_function(na, nb, q) == brute_g(na, nb, q)
            lin = sum(math.comb(na, f) * math.comb(nb, q - f)
                      for f in range(max(0, q - nb), min(na, q) + 1))
            assert lin == math.comb(na + nb, q)


def test_g_pair_particle_hole_symmetry():
    for a, b in product(range(9), repeat=2):
        for q in range(a + b + 1):
            lhs = g_function(a, b, q) + g_function(b, a, q)
            assert lhs == g_function(a, b, a + b - q) + g_function(b, a, a + b - q)


# ---------------------------------------------------------------- Page

def test_page_closed_form_value():
    assert page_purity_analytic(2, 4, 3) == pytest.approx(
        (g_function(2, 4, 3) + g_function(4, 2, 3)) / (20 * 21))
    with pytest.raises(ValueError):
        page_purity_analytic(2, 4, 6)


def test_page_purity_bounds():
    for na, nb in product(range(1, 6), repeat=2):
        for q in range(na + nb + 1):
            d = math.comb(na + nb, q)
            if d < 2:
                continue
            p = page_purity_analytic(na, nb, q)
            assert 1 / d - 1e-15 <= p <= 1


def test_page_purity_monte_carlo():
    psi = product_state(6, [0, 3, 5])
    est = page_purity_mc(2, 4, psi, 1000, 1)
    ref = page_purity_analytic(2, 4, 3)
    assert abs(est.value - ref) <= max(3 * est.std_error, 2 / 20)
    # the estimate is exact in expectation, so the plain 5 sigma test holds too
    assert abs(est.value - ref) < 5 * est.std_error
    assert est.one_norm_bound == pytest.approx(4 * est.value - 1)


def test_page_full_haar():
    psi = product_state(6, [])
    est = page_purity_mc(1, 5, psi, 4000, 2, symmetric=False)
    assert abs(est.value - haar_page_purity(2, 32)) < 5 * est.std_error
    # trivial B: a pure state stays pure
    assert page_purity_mc(3, 0, product_state(3, [1]), 10, 3, symmetric=False).value == \
        pytest.approx(1.0)


def test_page_mc_input_errors():
    with pytest.raises(ValueError):
        page_purity_mc(1, 1, np.ones(4), 10, 0)
    mixed = (product_state(2, []) + product_state(2, [0])) / np.sqrt(2)
    with pytest.raises(ValueError):
        page_purity_mc(1, 1, mixed, 10, 0)


# ---------------------------------------------------------------- Hayden-Preskill

def test_config_validation():
    assert HpConfig(1, 5, 3, 3, 1, 2).validate() == []
    fields = {f for f, _ in HpConfig(1, 5, 3, 2, 2, 7).validate()}
    assert fields == {"n_c", "m_a", "m_b"}


def test_hp_collapse_when_code_is_one_dimensional():
    cfg = HpConfig(1, 5, 3, 3, 0, 2)
    ac, c = hp_purities(cfg)
    assert ac == c
    ac, c = hp_purities_exact(cfg)
    assert ac == pytest.approx(c, rel=1e-15)


def test_hp_exact_against_dense_state():
    # independent route: a dense U(1)-Haar unitary on AB applied to the
    # explicitly built Bell-pair input, then partial traces by einsum
    from chargechaos.ensembles import sample_u1_haar
    from chargechaos.hilbert import build_charge_basis, embed_blocks
    cfg = HpConfig(2, 2, 3, 1, 1, 1)
    basis = build_charge_basis(4)
    a_states = [s for s in range(4) if bin(s).count("1") == 1]
    vals_ac, vals_c = [], []
    for r in range(3000):
        u = embed_blocks(sample_u1_haar(basis, 100 + r))
        psi = np.zeros((2, 2, 16), dtype=complex)
        for i, sa in enumerate(a_states):
            for j, sb in enumerate(a_states):
                psi[i, j] = u[:, (sa << 2) | sb] / 2
        psi = psi.reshape(2, 2, 8, 2)
        rho_ac = np.einsum("abcd,ebfd->acef", psi, psi.conj()).reshape(16, 16)
        rho_c = np.einsum("abcd,abed->ce", psi, psi.conj())
        vals_ac.append(np.sum(np.abs(rho_ac) ** 2))
        vals_c.append(np.sum(np.abs(rho_c) ** 2) / 2)
    ac, c = hp_purities_exact(cfg)
    for v, ref in ((vals_ac, ac), (vals_c, c)):
        v = np.array(v)
        assert abs(v.mean() - ref) < 5 * v.std(ddof=1) / np.sqrt(len(v))


def test_hp_sampler_reference_purity():
    s = hp_purity_samples(HpConfig(2, 4, 2, 4, 1, 2), 50, 1)
    assert np.allclose(s["purity_a"], 1 / 2)


@pytest.mark.parametrize("cfg", [HpConfig(1, 5, 3, 3, 1, 2), HpConfig(2, 4, 2, 4, 1, 2),
                                 HpConfig(2, 2, 2, 2, 1, 1)])
def test_hp_monte_carlo_matches_exact(cfg):
    mc = hp_monte_carlo(cfg, 3000, 7)
    ac, c = hp_purities_exact(cfg)
    assert abs(mc.purity_ac - ac) < 5 * mc.purity_ac_se
    assert abs(mc.purity_c_over_da - c) < 5 * mc.purity_c_over_da_se + 1e-15
    # the leading-order forms within the stated tolerance
    tol = 2 / cfg.d
    lac, lc = hp_purities(cfg)
    assert abs(mc.purity_ac - lac) <= max(3 * mc.purity_ac_se, tol)
    assert abs(mc.purity_c_over_da - lc) <= max(3 * mc.purity_c_over_da_se, tol)


def test_hp_cmi_closed_form_against_sampling():
    cfg = HpConfig(2, 4, 2, 4, 1, 2)
    mc = hp_monte_carlo(cfg, 3000, 8)
    assert abs(mc.cmi2 - hp_cmi2(cfg)) <= max(3 * mc.cmi2_se, 2 / cfg.d)
    assert abs(mc.cmi2 - hp_cmi2_exact(cfg)) < 5 * mc.cmi2_se


def test_cmi_saturation_and_sign():
    cfg = HpConfig(1, 3, 2, 2, 0, 0)          # m = 0: both G are 1, ratio d~_A/d~_B = 1
    assert decoupling_margin(cfg) == 1
    assert hp_cmi2(cfg) == SATURATED
    for cfg in (HpConfig(2, 4, 2, 4, 1, 2), HpConfig(1, 16, 9, 8, 1, 7)):
        assert decoupling_margin(cfg) < 1
        assert hp_cmi2(cfg) >= 0


def test_haar_baselines():
    assert hp_cmi2_haar(2, 8, 1e6) == pytest.approx(0, abs=1e-9)
    assert hp_cmi2_haar(2, 8, 1) > 0.5
    assert haar_hp_purity_ac(2, 4, 2, 4) == pytest.approx(1 / 4 + 1 / 16)


def test_haar_purity_ac_leading_order():
    # Bell pairs on A (1 qubit) and B (3 qubits), Haar U on AB, C = 2 qubits
    n = 1500
    us = sample_haar_unitaries(16, n, 9)
    psi = us.reshape(n, 4, 4, 2, 8) / 4                 # (out C, out D, in A, in B)
    m = psi.transpose(0, 3, 1, 4, 2).reshape(n, 2 * 4, 8 * 4)
    rho = m @ np.conj(np.swapaxes(m, 1, 2))
    p = np.sum(np.abs(rho) ** 2, axis=(1, 2))
    approx = haar_hp_purity_ac(2, 8, 4, 4)
    assert abs(p.mean() - approx) < 0.1 * approx


def test_margin_regimes():
    assert decoupling_margin(HpConfig(1, 16, 9, 8, 1, 7)) < 0.05
    assert decoupling_margin(HpConfig(1, 15, 12, 4, 1, 1)) >= 1
    assert decoupling_margin(HpConfig(1, 3, 2, 2, 0, 0)) == Fraction(1, 1)
    cfg = HpConfig(2, 3, 3, 2, 0, 0)
    assert decoupling_margin(cfg) == pytest.approx(cfg.dt_a / cfg.dt_b)


def test_small_charge_profile_exact():
    for nc in range(4, 21):
        for nd in range(4, 21):
            for na in (1, 2, 3):
                nb = nc + nd - na
                p = small_charge_profile(na, nb, nc, nd)
                assert p.exact_lhs == Fraction(g_function(nc, nd, 2), na)
                assert p.exact_rhs == Fraction(g_function(nd, nc, 2), nb)
                assert p.margin == pytest.approx(decoupling_margin(HpConfig(na, nb, nc, nd, 1, 1)))


def test_small_charge_asymptotics():
    p = small_charge_profile(1, 99, 50, 50)
    assert abs(float(p.asymptotic_lhs / p.exact_lhs) - 1) < 0.1
    assert abs(float(p.asymptotic_rhs / p.exact_rhs) - 1) < 0.1
    n_c = small_charge_crossover(1, 19, range(1, 20))
    assert n_c is not None
    assert small_charge_profile(1, 19, n_c, 20 - n_c).asymptotically_blocked
    assert not small_charge_profile(1, 19, n_c - 1, 21 - n_c).asymptotically_blocked


# ---------------------------------------------------------------- codes

def _pauli_pair(mu, nu):
    return PauliString(mu).matrix().conj().T @ PauliString(nu).matrix()


def test_kl_haar_same_codeword():
    s = kl_statistics(_pauli_pair("XIZY", "ZZII"), 2, 2, 10000, 1)
    assert abs(s.mean - s.predicted_mean) < 5 * s.mean_se
    assert abs(s.variance - 1 / 17) < 5 * s.variance_se
    assert s.predicted_variance == pytest.approx(1 / 17)


def test_kl_haar_distinct_codewords_exact_variance():
    # the Weingarten value L/(L^2 - 1) for a traceless unitary O
    s = kl_statistics(_pauli_pair("XIZY", "ZZII"), 0, 3, 10000, 2)
    assert abs(s.mean) < 5 * s.mean_se
    assert s.exact_variance == pytest.approx(16 / 255)
    assert abs(s.variance - s.exact_variance) < 5 * s.variance_se


def test_kl_identity():
    s = kl_statistics(np.eye(16), 5, 5, 200, 3)
    assert s.mean == pytest.approx(1.0)
    assert s.variance < 1e-28
    s = kl_statistics(np.eye(16), 5, 6, 200, 3)
    assert abs(s.mean) < 1e-14 and s.variance < 1e-28
    assert s.exact_variance == 0


def test_kl_u1():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    h = h + h.conj().T
    s = kl_statistics(h, 3, 3, 10000, 5, charge=2)
    assert s.dimension == 10
    assert abs(s.mean - s.predicted_mean) < 5 * s.mean_se
    assert abs(s.variance - s.predicted_variance) < 5 * s.variance_se
    s = kl_statistics(h, 3, 5, 10000, 6, charge=2)
    assert abs(s.variance - s.exact_variance) < 5 * s.variance_se
    with pytest.raises(ValueError):
        kl_statistics(h, 3, 7, 10, 0, charge=2)


def test_kl_scaling_slope():
    vs = []
    for L in (8, 16, 32, 64):
        D = int(math.log2(L))
        vs.append(kl_statistics(PauliString("X" + "I" * (D - 1)).matrix(), 0, 0, 10000, L).variance)
    slope = kl_variance_slope([8, 16, 32, 64], vs)
    assert abs(slope + 1) < 0.1
    # the exact 1/(L+1) law itself
    exact = kl_variance_slope([8, 16, 32, 64], [1 / (L + 1) for L in (8, 16, 32, 64)])
    assert -1 < exact < -0.9


# ---------------------------------------------------------------- Eastin-Knill

def test_eastin_knill_bound():
    assert eastin_knill_bound(0, 5) == 0
    assert eastin_knill_bound(2, 10) == pytest.approx(0.1)
    assert eastin_knill_bound(3, 10) > eastin_knill_bound(2, 10) > eastin_knill_bound(2, 12)


def test_ek_consistency_scan():
    assert ek_consistency_check(HpConfig(2, 4, 3, 3, 0, 2)).lhs == 0
    assert ek_consistency_check(HpConfig(2, 4, 3, 3, 0, 2)).satisfied
    # large-charge family n_C = 2 n_D, m = n_D: holds for n_D <= 8; past that the
    # decoupling ratio decays faster than 1/D^2 and the heuristic fails
    results = {}
    for na in (1, 2, 3):
        for nd in range(4, 11):
            for ma in range(na + 1):
                cfg = HpConfig(na, 3 * nd - na, 2 * nd, nd, ma, nd - ma)
                results[(na, nd, ma)] = ek_consistency_check(cfg).satisfied
    assert all(v for (na, nd, ma), v in results.items() if nd <= 8)
    assert not all(results.values())
    deep = ek_consistency_check(HpConfig(1, 40, 21, 20, 1, 19))
    assert deep.lhs < 2e-4 and deep.rhs < 1e-9


def test_report_record():
    r = decoupling_report(HpConfig(2, 4, 2, 4, 1, 2), exact=True)
    assert isinstance(r, DecouplingReport)
    rec = r.to_record()
    assert set(rec) == {"purity_ac", "purity_c", "purity_a", "cmi2", "margin", "ek_bound"}
    assert rec["purity_a"] == 0.5
    assert rec["cmi2"] == pytest.approx(cmi2_from_purities(*hp_purities_exact(HpConfig(2, 4, 2, 4, 1, 2))))
