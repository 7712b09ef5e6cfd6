"""Page purity, charged Hayden-Preskill decoupling and code statistics.

Qubit layout: subsystem A (or C) is the leading block of qubits, i.e. the
high bits of the global index, followed by B (or D). Charges count ones.

Purities of random states restricted to a charge-q sector follow from the
second moment of a Haar vector in that sector,

    E |psi><psi|^{(x)2} = (P (x) P)(1 + SWAP) / (d (d + 1)),

with P the sector projector. The partial swaps on the two tensor factors
produce the G-function sums below.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import rng as rngmod
from ._stats import jackknife_se, leave_one_out_means, mean_and_se
from .ensembles import sample_haar_columns
from .hilbert import build_charge_basis, sector_dim

SATURATED = math.inf
"""Returned by :func:`hp_cmi2` when the decoupling ratio reaches 1."""


# ---------------------------------------------------------------- combinatorics

def g_function(n_a: int, n_b: int, q: int) -> int:
    """G(n_A, n_B, q) = sum_f C(n_A, f) C(n_B, q - f)^2 (exact integer)."""
    n_a, n_b, q = int(n_a), int(n_b), int(q)
    if n_a < 0 or n_b < 0:
        raise ValueError("qubit counts must be non-negative")
    if not 0 <= q <= n_a + n_b:
        raise ValueError(f"charge {q} outside [0, {n_a + n_b}]")
    return sum(math.comb(n_a, f) * math.comb(n_b, q - f) ** 2
               for f in range(max(0, q - n_b), min(n_a, q) + 1))


def page_purity_analytic(n_a: int, n_b: int, q: int) -> float:
    """Mean purity of subsystem A for a Haar random state of charge q.

    Equals (G(n_A, n_B, q) + G(n_B, n_A, q)) / (d_q (d_q + 1)). The second
    moment above makes this exact for every d_q, so no correction term is
    needed.
    """
    d = sector_dim(n_a + n_b, q)
    if d < 2:
        raise ValueError(f"sector q={q} has dimension {d}; the purity is trivially 1")
    num = g_function(n_a, n_b, q) + g_function(n_b, n_a, q)
    return float(Fraction(num, d * (d + 1)))


@dataclass(frozen=True)
class PurityEstimate:
    value: float
    std_error: float
    one_norm_bound: float
    realizations: int


def _purity_first_block(states, n_first: int, n_total: int):
    """Tr rho^2 of the leading n_first qubits for a batch of state vectors."""
    m = states.reshape(states.shape[0], 1 << n_first, 1 << (n_total - n_first))
    rho = m @ np.conj(np.swapaxes(m, 1, 2))
    return np.sum(np.abs(rho) ** 2, axis=(1, 2))


def page_purity_mc(n_a: int, n_b: int, state, realizations: int, rng=None,
                   symmetric: bool = True) -> PurityEstimate:
    """Monte Carlo purity of A after a random unitary acts on ``state``.

    With ``symmetric`` the unitary is U(1)-symmetric Haar, so the state must
    have a definite charge; only that sector block acts, and it is sampled
    as a Haar column. Otherwise a full Haar unitary is used. The one-norm
    bound is d_A * purity - 1, an upper bound on the mean squared trace
    distance of rho_A from the maximally mixed state.
    """
    n = n_a + n_b
    psi = np.asarray(state, dtype=np.complex128).ravel()
    if psi.size != 1 << n:
        raise ValueError(f"state has length {psi.size}, expected {1 << n}")
    if abs(np.vdot(psi, psi).real - 1) > 1e-10:
        raise ValueError("state is not normalized")
    if realizations < 2:
        raise ValueError("need at least two realizations")
    g = rngmod.as_generator(rng)
    if symmetric:
        basis = build_charge_basis(n)
        support = np.flatnonzero(np.abs(psi) > 0)
        charges = set(basis.charges[support].tolist())
        if len(charges) != 1:
            raise ValueError("state does not have a definite charge")
        q = charges.pop()
        idx = basis.sector_states[q]
        # U psi is a Haar vector in the sector, whatever the input
        cols = sample_haar_columns(len(idx), 1, realizations, g)[:, :, 0]
        out = np.zeros((realizations, 1 << n), dtype=np.complex128)
        out[:, idx] = cols
    else:
        out = sample_haar_columns(1 << n, 1, realizations, g)[:, :, 0]
    pur = _purity_first_block(out, n_a, n)
    mean, err = mean_and_se(pur)
    return PurityEstimate(float(mean), float(err), float((1 << n_a) * mean - 1), realizations)


def haar_page_purity(d_a: int, d_b: int) -> float:
    """(d_A + d_B) / (d_A d_B + 1) for a Haar random state."""
    return (d_a + d_b) / (d_a * d_b + 1)


def product_state(n: int, ones) -> np.ndarray:
    """Computational basis state with the listed qubits (0 = leftmost) set."""
    b = 0
    for i in ones:
        b |= 1 << (n - 1 - i)
    v = np.zeros(1 << n, dtype=np.complex128)
    v[b] = 1
    return v


# ---------------------------------------------------------------- Hayden-Preskill

@dataclass(frozen=True)
class HpConfig:
    """Charged Hayden-Preskill setup.

    A (n_A qubits, charge m_A) and B (n_B qubits, charge m_B) are each
    maximally entangled with references A-bar and B-bar inside their fixed
    charge subspaces. A U(1)-symmetric unitary on AB outputs C (n_C qubits)
    and D (n_D qubits).
    """

    n_a: int
    n_b: int
    n_c: int
    n_d: int
    m_a: int
    m_b: int

    def validate(self) -> list:
        errs = []
        for name in ("n_a", "n_b", "n_c", "n_d"):
            if getattr(self, name) < 0:
                errs.append((name, "must be >= 0"))
        if self.n_a + self.n_b != self.n_c + self.n_d:
            errs.append(("n_c", "n_a + n_b must equal n_c + n_d"))
        if not 0 <= self.m_a <= self.n_a:
            errs.append(("m_a", "must lie in [0, n_a]"))
        if not 0 <= self.m_b <= self.n_b:
            errs.append(("m_b", "must lie in [0, n_b]"))
        return errs

    def check(self) -> "HpConfig":
        errs = self.validate()
        if errs:
            raise ValueError("; ".join(f"{f}: {m}" for f, m in errs))
        return self

    @property
    def n(self) -> int:
        return self.n_a + self.n_b

    @property
    def m(self) -> int:
        return self.m_a + self.m_b

    @property
    def dt_a(self) -> int:
        return math.comb(self.n_a, self.m_a)

    @property
    def dt_b(self) -> int:
        return math.comb(self.n_b, self.m_b)

    @property
    def d(self) -> int:
        return math.comb(self.n, self.m)

    def g_pair(self) -> tuple:
        """(G(n_C, n_D, m), G(n_D, n_C, m))."""
        return g_function(self.n_c, self.n_d, self.m), g_function(self.n_d, self.n_c, self.m)


def hp_purities(cfg: HpConfig) -> tuple:
    """Leading-order (Tr rho_{A-bar C}^2, Tr rho_C^2 / d~_A).

    These are G_C/(d^2 d~_A) + G_D/(d^2 d~_B) and
    G_C/(d^2 d~_A) + G_D/(d^2 d~_A^2 d~_B), with d = C(n, m).
    """
    cfg.check()
    gc, gd = cfg.g_pair()
    d2, a, b = cfg.d ** 2, cfg.dt_a, cfg.dt_b
    ac = Fraction(gc, d2 * a) + Fraction(gd, d2 * b)
    c = Fraction(gc, d2 * a) + Fraction(gd, d2 * a * a * b)
    return float(ac), float(c)


def hp_purities_exact(cfg: HpConfig) -> tuple:
    """Exact Haar averages (Tr rho_{A-bar C}^2, Tr rho_C^2 / d~_A).

    The input lives in a d~_A d~_B dimensional subspace of the charge-m
    sector, so the Haar second moment of the sector block (Weingarten
    coefficients 1/(d^2-1) and -1/(d(d^2-1))) gives both purities exactly.
    For d = 1 every purity is 1.
    """
    cfg.check()
    gc, gd = cfg.g_pair()
    d, a, b = cfg.d, cfg.dt_a, cfg.dt_b
    if d == 1:
        return 1.0, 1.0 / a
    f = Fraction
    ac = ((f(1, a) - f(1, d * b)) * gc + (f(1, b) - f(1, d * a)) * gd) / (d * d - 1)
    c = ((1 - f(1, d * a * b)) * gc + (f(1, a * b) - f(1, d)) * gd) / (d * d - 1)
    return float(ac), float(c / a)


def decoupling_margin(cfg: HpConfig) -> float:
    """d~_A G(n_D, n_C, m) / (d~_B G(n_C, n_D, m)); decoupling needs this << 1."""
    cfg.check()
    gc, gd = cfg.g_pair()
    return float(Fraction(cfg.dt_a * gd, cfg.dt_b * gc))


def hp_cmi2(cfg: HpConfig) -> float:
    """Closed-form 2-Renyi CMI I(A-bar : C | B-bar D) in bits, -log2(1 - r).

    ``r`` is :func:`decoupling_margin`; r >= 1 returns :data:`SATURATED`.
    """
    r = decoupling_margin(cfg)
    if r >= 1:
        return SATURATED
    return float(-math.log2(1 - r))


def cmi2_from_purities(purity_ac: float, purity_c_over_da: float) -> float:
    """log2(Tr rho_{A-bar C}^2 / (Tr rho_C^2 Tr rho_{A-bar}^2)); Tr rho_{A-bar}^2 = 1/d~_A."""
    return float(np.log2(purity_ac / purity_c_over_da))


def hp_cmi2_exact(cfg: HpConfig) -> float:
    """The CMI built from :func:`hp_purities_exact`."""
    return cmi2_from_purities(*hp_purities_exact(cfg))


def hp_cmi2_haar(d_a: float, d_b: float, d_d: float) -> float:
    """No-symmetry baseline log2((d_A^3 d_B + d_A d_B d_D^2)/(d_A d_B + d_A d_B d_D^2))."""
    num = d_a**3 * d_b + d_a * d_b * d_d**2
    den = d_a * d_b + d_a * d_b * d_d**2
    return float(math.log2(num / den))


def haar_hp_purity_ac(d_a, d_b, d_c, d_d) -> float:
    """Leading-order Tr rho_{A-bar C}^2 ~ 1/(d_A d_C) + 1/(d_B d_D) without symmetry."""
    return 1 / (d_a * d_c) + 1 / (d_b * d_d)


def hp_state_samples(cfg: HpConfig, realizations: int, rng=None) -> np.ndarray:
    """Sampled HP states as arrays (R, d~_A, d~_B, 2^n_C, 2^n_D).

    Index order is (A-bar, B-bar, C, D). Only the charge-m block of the
    U(1)-symmetric unitary touches the input, and its columns at the
    d~_A d~_B code positions are a Haar isometry, which is what is drawn.
    Which positions they are does not matter for the distribution.
    """
    cfg.check()
    basis = build_charge_basis(cfg.n)
    d, a, b = cfg.d, cfg.dt_a, cfg.dt_b
    g = rngmod.as_generator(rng)
    # the columns at the a*b input positions form a Haar isometry
    cols = sample_haar_columns(d, a * b, realizations, g)    # (R, d, a*b)
    out = np.zeros((realizations, a * b, 1 << cfg.n), dtype=np.complex128)
    out[:, :, basis.sector_states[cfg.m]] = np.swapaxes(cols, 1, 2)
    out /= math.sqrt(a * b)
    return out.reshape(realizations, a, b, 1 << cfg.n_c, 1 << cfg.n_d)


def hp_purity_samples(cfg: HpConfig, realizations: int, rng=None) -> dict:
    """Per-realization Tr rho_{A-bar C}^2, Tr rho_C^2 and Tr rho_{A-bar}^2."""
    psi = hp_state_samples(cfg, realizations, rng)
    R, a, b, dc, dd = psi.shape
    # rho_{A-bar C}: contract B-bar and D
    m_ac = psi.transpose(0, 1, 3, 2, 4).reshape(R, a * dc, b * dd)
    rho_ac = m_ac @ np.conj(np.swapaxes(m_ac, 1, 2))
    m_c = psi.transpose(0, 3, 1, 2, 4).reshape(R, dc, a * b * dd)
    rho_c = m_c @ np.conj(np.swapaxes(m_c, 1, 2))
    m_a = psi.reshape(R, a, b * dc * dd)
    rho_a = m_a @ np.conj(np.swapaxes(m_a, 1, 2))
    f = lambda r: np.sum(np.abs(r) ** 2, axis=(1, 2))
    return {"purity_ac": f(rho_ac), "purity_c": f(rho_c), "purity_a": f(rho_a)}


@dataclass(frozen=True)
class HpMonteCarlo:
    purity_ac: float
    purity_ac_se: float
    purity_c_over_da: float
    purity_c_over_da_se: float
    cmi2: float
    cmi2_se: float
    realizations: int


def hp_monte_carlo(cfg: HpConfig, realizations: int, rng=None) -> HpMonteCarlo:
    """Sampled purities and the CMI built from the averaged purities."""
    s = hp_purity_samples(cfg, realizations, rng)
    pac, pc = s["purity_ac"], s["purity_c"] / cfg.dt_a
    m_ac, e_ac = mean_and_se(pac)
    m_c, e_c = mean_and_se(pc)
    cmi = cmi2_from_purities(m_ac, m_c)
    loo = np.log2(leave_one_out_means(pac) / leave_one_out_means(pc))
    return HpMonteCarlo(float(m_ac), float(e_ac), float(m_c), float(e_c), cmi,
                        float(jackknife_se(loo)), realizations)


# ---------------------------------------------------------------- regimes

@dataclass(frozen=True)
class SmallChargeProfile:
    """G(n_C,n_D,2)/n_A and G(n_D,n_C,2)/n_B, exact and quartic asymptotics."""

    exact_lhs: Fraction
    exact_rhs: Fraction
    asymptotic_lhs: Fraction
    asymptotic_rhs: Fraction

    @property
    def margin(self) -> float:
        """Decoupling ratio exact_rhs / exact_lhs."""
        return float(self.exact_rhs / self.exact_lhs)

    @property
    def asymptotically_blocked(self) -> bool:
        """True when n_D^4/n_A <= n_C^4/n_B, where decoupling fails."""
        return self.asymptotic_lhs <= self.asymptotic_rhs


def small_charge_profile(n_a: int, n_b: int, n_c: int, n_d: int) -> SmallChargeProfile:
    """Closed forms for m = 2 with one charge in each of A and B.

    Exact: (n_D^2 (n_D - 1)^2 / 4 + n_C n_D^2 + n_C (n_C - 1) / 2) / n_A and the
    mirror with (C, A) and (D, B) exchanged. The quartic asymptotics keep the
    1/4 so that their ratio to the exact forms tends to 1.
    """
    if min(n_a, n_b) < 1 or min(n_c, n_d) < 0 or n_a + n_b != n_c + n_d:
        raise ValueError("need n_A, n_B >= 1 and n_A + n_B = n_C + n_D")
    F = Fraction

    def side(x, y, n):
        return (F(x * x * (x - 1) ** 2, 4) + y * x * x + F(y * (y - 1), 2)) / n

    return SmallChargeProfile(side(n_d, n_c, n_a), side(n_c, n_d, n_b),
                              F(n_d**4, 4 * n_a), F(n_c**4, 4 * n_b))


def small_charge_crossover(n_a: int, n_b: int, n_c_range) -> int | None:
    """Smallest n_C (n_D = n_A + n_B - n_C) whose asymptotics block decoupling."""
    for n_c in n_c_range:
        n_d = n_a + n_b - n_c
        if n_d < 0:
            continue
        if small_charge_profile(n_a, n_b, n_c, n_d).asymptotically_blocked:
            return int(n_c)
    return None


# ---------------------------------------------------------------- codes

@dataclass(frozen=True)
class KLStatistics:
    """Knill-Laflamme matrix element <beta_a|O|beta_b> over random encodings.

    ``predicted_variance`` is the closed form -|<O>|^2 delta_ab/(L+1) +
    <OO^+>/(L+1); ``exact_variance`` is the Weingarten value, which differs
    from it when a != b: L(<OO^+> - |<O>|^2)/(L^2 - 1).
    """

    mean: complex
    mean_se: float
    variance: float
    variance_se: float
    predicted_mean: complex
    predicted_variance: float
    exact_variance: float
    dimension: int
    realizations: int


def _kl_predictions(o_block, same: bool):
    L = o_block.shape[0]
    tr = np.trace(o_block) / L
    too = np.real(np.trace(o_block @ o_block.conj().T)) / L
    mean = tr if same else 0.0
    pred = (too - (abs(tr) ** 2 if same else 0.0)) / (L + 1)
    if same:
        exact = (too - abs(tr) ** 2) / (L + 1)
    else:
        exact = L * (too - abs(tr) ** 2) / (L * L - 1) if L > 1 else 0.0
    return complex(mean), float(pred), float(exact)


def kl_statistics(O, a: int, b: int, realizations: int, rng=None, charge: int | None = None,
                  ) -> KLStatistics:
    """Mean and variance of <beta_a|O|beta_b> with |beta_x> = U|x>.

    Args:
        O: dense operator on L = 2^D (or any L for the Haar case).
        a, b: global basis indices of the two codewords.
        charge: if given, U is U(1)-symmetric Haar and both codewords must
            have this charge; only the charge block of O enters.
    """
    O = np.asarray(O, dtype=np.complex128)
    L = O.shape[0]
    if O.shape != (L, L):
        raise ValueError("operator must be square")
    if not (0 <= a < L and 0 <= b < L):
        raise ValueError("codeword index out of range")
    if realizations < 2:
        raise ValueError("need at least two realizations")
    g = rngmod.as_generator(rng)
    if charge is None:
        block, ia, ib = O, a, b
    else:
        D = int(round(math.log2(L)))
        if 1 << D != L:
            raise ValueError("U(1) case needs L = 2^D")
        basis = build_charge_basis(D)
        if basis.charges[a] != charge or basis.charges[b] != charge:
            raise ValueError(f"codewords must both have charge {charge}")
        idx = basis.sector_states[charge]
        block = O[np.ix_(idx, idx)]
        ia, ib = int(basis.ranks[a]), int(basis.ranks[b])
    d = block.shape[0]
    # columns a and b of a Haar unitary are jointly a Haar isometry
    iso = sample_haar_columns(d, 1 if ia == ib else 2, realizations, g)
    ua, ub = iso[:, :, 0], iso[:, :, -1]
    x = np.einsum("ri,ij,rj->r", np.conj(ua), block, ub)
    mean, mean_se = mean_and_se(x)
    dev = np.abs(x - mean) ** 2
    var = float(dev.sum() / (realizations - 1))
    var_se = float(dev.std(ddof=1) / math.sqrt(realizations))
    pm, pv, ev = _kl_predictions(block, ia == ib)
    return KLStatistics(complex(mean), float(mean_se), var, var_se, pm, pv, ev, d, realizations)


def kl_variance_slope(Ls, variances) -> float:
    """Least-squares slope of log(variance) against log(L)."""
    x, y = np.log(np.asarray(Ls, dtype=float)), np.log(np.asarray(variances, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def eastin_knill_bound(m_a: int, D: int) -> float:
    """Worst-case infidelity bound m_A / (2D) (logical charge spread m_A, unit spread per qubit)."""
    if m_a < 0 or D < 1:
        raise ValueError("need m_A >= 0 and D >= 1")
    return m_a / (2 * D)


@dataclass(frozen=True)
class EkCheck:
    lhs: float
    rhs: float
    satisfied: bool


def ek_consistency_check(cfg: HpConfig) -> EkCheck:
    """Compare m_A^2 / (4 D^2) with the decoupling ratio, D = n_C + n_D.

    This is a heuristic consistency relation, reported, not enforced.
    """
    cfg.check()
    lhs = eastin_knill_bound(cfg.m_a, cfg.n_c + cfg.n_d) ** 2
    rhs = decoupling_margin(cfg)
    return EkCheck(float(lhs), float(rhs), bool(lhs <= rhs))


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class DecouplingReport:
    purity_ac: float
    purity_c: float
    purity_a: float
    cmi2: float
    margin: float
    ek_bound: float

    def to_record(self) -> dict:
        return asdict(self)


def decoupling_report(cfg: HpConfig, exact: bool = False) -> DecouplingReport:
    """Purities (Tr rho_C^2 itself, not divided by d~_A), CMI, margin and EK bound."""
    pac, pc_over = (hp_purities_exact if exact else hp_purities)(cfg)
    cmi = cmi2_from_purities(pac, pc_over) if exact else hp_cmi2(cfg)
    return DecouplingReport(pac, pc_over * cfg.dt_a, 1.0 / cfg.dt_a, cmi,
                            decoupling_margin(cfg), eastin_knill_bound(cfg.m_a, cfg.n_c + cfg.n_d))
