"""Command-line experiment runner.

Every experiment writes one CSV per series and a ``manifest.json`` with the
resolved flat config and the sha256 of each CSV into the output directory.
Passing that manifest back with ``--config`` repeats the run exactly.

Exit status: 0 on success, 2 for an invalid configuration (the message
names the field), 3 when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__
from . import rng as rngmod
from .config import (EXPERIMENTS, LARGE, ConfigError, RunConfig, operator_strings,
                     parse_time_spec, read_flat, resolve)
from .series import ObservableSeries, _fmt, time_grid

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- moment text

_WIRING_RE = re.compile(r"^\s*p\s*=\s*(\d+)\s+wiring\s*\{([\d\s,]*)\}\s*$")


def parse_wiring(text: str) -> tuple:
    """``"p=2 wiring {1,2,1,2}"`` -> (2, (1, 2, 1, 2)); 1 is U and 2 is U^+."""
    m = _WIRING_RE.match(text)
    if not m:
        raise ValueError(f"expected 'p=<order> wiring {{codes}}', got {text!r}")
    p = int(m.group(1))
    codes = tuple(int(c) for c in m.group(2).replace(",", " ").split())
    if not codes or set(codes) - {1, 2}:
        raise ValueError("wiring codes must be 1 (U) or 2 (U^+)")
    if codes.count(1) != p:
        raise ValueError(f"wiring has {codes.count(1)} U factors but p={p}")
    return p, codes


def moment_text(text: str, dimension: str = "d") -> str:
    """Symbolic Haar average of the operator word described by ``text``.

    Operators X1, X2, ... sit in front of the U factors and Y1, Y2, ... in
    front of the U^+ factors, in order.
    """
    import sympy as sp
    from .weingarten import OperatorWord, haar_moment
    _, codes = parse_wiring(text)
    names, nu, nd = [], 0, 0
    for c in codes:
        if c == 1:
            nu += 1
            names.append(f"X{nu}")
        else:
            nd += 1
            names.append(f"Y{nd}")
    word = OperatorWord.from_pattern(codes, names)
    res = haar_moment(word, sp.Symbol(dimension, positive=True, integer=True))
    return res.format()


# ---------------------------------------------------------------- output helpers

def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for x in row:
                if isinstance(x, (bool, np.bool_)):
                    cells.append("1" if x else "0")
                elif isinstance(x, (int, np.integer)):
                    cells.append(str(int(x)))
                elif isinstance(x, str):
                    cells.append(x)
                else:
                    cells.append(_fmt(x))
            f.write(",".join(cells) + "\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def _clean(x):
    """JSON-safe summary values (inf/nan become strings)."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class _Run:
    """Collects artifacts of one experiment."""

    def __init__(self, cfg: RunConfig, workers: int):
        self.cfg = cfg
        self.workers = workers
        self.files = []
        self.summary = {}
        self.log_axes = {}
        os.makedirs(cfg.output, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.cfg.output, name)

    def series(self, name, s: ObservableSeries, loglog=False):
        s.to_csv(self.path(name))
        self.log_axes[name] = loglog

    def table(self, name, header, rows):
        _write_table(self.path(name), header, rows)

    def times(self):
        g = self.cfg.time_grid
        return time_grid(g.t_min, g.t_max, g.points, g.spacing)

    def ensemble(self, vectors=False):
        from .ensembles import spectral_ensemble
        return spectral_ensemble(self.cfg.ensemble, keep_vectors=vectors, workers=self.workers)

    def manifest(self) -> dict:
        files = {name: _sha256(os.path.join(self.cfg.output, name)) for name in sorted(self.files)}
        return {"chargechaos_version": __version__, "config": self.cfg.flat(),
                "seed": self.cfg.ensemble.seed, "files": files, "summary": _clean(self.summary)}


# ---------------------------------------------------------------- experiments

def _exp_dos(run: _Run):
    from .chaos.dos import density_of_states, edge_exponent
    p = run.cfg.params
    se = run.ensemble()
    run.table("dos_whole.csv", *_hist_rows(density_of_states(se, p["bins"], "whole")))
    rows = []
    scopes = ["whole"] + [q for q in range(se.n_sectors) if se.sector_dims[q] > 1]
    for scope in scopes:
        if scope != "whole":
            h = density_of_states(se, p["bins"], scope)
            run.table(f"dos_sector_{scope}.csv", *_hist_rows(h))
        try:
            fit = edge_exponent(se, scope, p["fraction"])
        except ValueError:
            continue                      # degenerate sector (all levels equal)
        rows.append((str(scope), fit.alpha, fit.std_error, fit.points, fit.e_max))
    run.table("edge_exponents.csv", ("scope", "alpha", "std_error", "points", "e_max"), rows)
    run.summary["edge_alpha"] = {r[0]: r[1] for r in rows}


def _hist_rows(h):
    d = h.density
    rows = [(a, b, int(c), x) for a, b, c, x in zip(h.edges[:-1], h.edges[1:], h.counts, d)]
    return ("bin_left", "bin_right", "count", "density"), rows


def _exp_sff(run: _Run):
    from .chaos.decomposition import general_r2k_partition, sff_morphology
    from .chaos.form_factors import form_factor_series
    stat = run.cfg.params["statistic"]
    se, times = run.ensemble(), run.times()
    s = form_factor_series(se, stat, times)
    run.series(f"sff_{stat}.csv", s, loglog=True)
    pred = None
    if stat in ("R2", "R4") and se.n_sectors > 1:
        pred = general_r2k_partition(se, 1 if stat == "R2" else 2, times)
        run.series(f"sff_{stat}_partition.csv", pred, loglog=True)
    run.summary["morphology"] = sff_morphology(s, pred)


def _exp_sff_sectors(run: _Run):
    from .chaos.form_factors import form_factor_series
    stat = run.cfg.params["statistic"]
    se, times = run.ensemble(), run.times()
    for q in range(se.n_sectors):
        run.series(f"sff_{stat}_sector_{q}.csv", form_factor_series(se, stat, times, q), loglog=True)


def _identity_outputs(run, name, check):
    run.series(f"{name}_relative_error.csv", check)
    for side in ("lhs", "rhs"):
        s = ObservableSeries(check.times, check.extra[side], check.extra[f"{side}_se"],
                             check.realizations, side)
        run.series(f"{name}_{side}.csv", s, loglog=True)
    run.summary["max_relative_error"] = float(np.nanmax(check.values))
    run.summary["masked_points"] = int(np.sum(check.extra["masked"]))


def _exp_r2_check(run: _Run):
    from .chaos.decomposition import r2_decomposition_check
    _identity_outputs(run, "r2", r2_decomposition_check(run.ensemble(), run.times()))


def _exp_r4_check(run: _Run):
    from .chaos.decomposition import r4_decomposition_check
    check = r4_decomposition_check(run.ensemble(), run.times())
    _identity_outputs(run, "r4", check)
    agree = check.extra["rep_agreement"]
    run.series("r4_representation_agreement.csv",
               ObservableSeries(check.times, agree, np.zeros_like(agree), check.realizations))
    run.summary["max_representation_disagreement"] = float(np.max(agree))


def _exp_fp(run: _Run):
    from .chaos.frame import frame_potential_series, haar_frame_potential
    k = run.cfg.params["k"]
    se = run.ensemble(vectors=True)
    run.series(f"fp_k{k}.csv", frame_potential_series(se, k, run.times()), loglog=True)
    run.summary["haar_value"] = haar_frame_potential(k, se.L)


def _exp_fp_analytic(run: _Run):
    from .chaos.frame import f1_decomposition_check
    check = f1_decomposition_check(run.ensemble(vectors=True), run.times())
    run.series("f1_relative_error.csv", check)
    for name in ("direct", "analytic"):
        s = ObservableSeries(check.times, check.extra[name], check.extra[f"{name}_se"],
                             check.realizations, name)
        run.series(f"f1_{name}.csv", s, loglog=True)
    run.summary["max_relative_error"] = float(np.max(check.values))


def _exp_kinv(run: _Run):
    from .chaos.frame import k_invariance
    p = run.cfg.params
    se = run.ensemble(vectors=True)
    times = run.times()
    seed = run.cfg.ensemble.seed

    def at(it):
        ens = [se.unitary_blocks(r, times[it]) for r in range(se.n_realizations)]
        g = rngmod.substream(seed, rngmod.CONJUGATION, it)
        return k_invariance(ens, p["k"], p["conjugations"], g)

    res = rngmod.ordered_map(at, range(len(times)), run.workers)
    s = ObservableSeries(times, [v for v, _ in res], [e for _, e in res], se.n_realizations,
                         f"I{p['k']}")
    run.series(f"kinv_k{p['k']}.csv", s)


def _exp_otoc(run: _Run):
    from .chaos.otoc import otoc_kinv_approx, otoc_series
    ops = operator_strings(run.cfg.params["operators"], run.cfg.ensemble.size)
    se = run.ensemble(vectors=True)
    times = run.times()
    run.series("otoc.csv", otoc_series(se, ops, times))
    run.series("otoc_kinv_approx.csv", otoc_kinv_approx(se, ops, times, with_direct=False))
    run.summary["operators"] = ops


def _exp_page(run: _Run):
    from .decoupling import page_purity_analytic, page_purity_mc, product_state
    from .hilbert import sector_dim
    p, seed = run.cfg.params, run.cfg.ensemble.seed
    n_a, n_b = p["n_a"], p["n_b"]
    n = n_a + n_b
    rows = []
    for q in range(n + 1):
        d = sector_dim(n, q)
        psi = product_state(n, range(q))
        est = page_purity_mc(n_a, n_b, psi, p["samples"], rngmod.substream(seed, rngmod.MONTE_CARLO, q))
        exact = page_purity_analytic(n_a, n_b, q) if d > 1 else 1.0
        rows.append((q, d, exact, est.value, est.std_error, est.one_norm_bound))
    run.table("page.csv", ("q", "d_q", "analytic", "mc", "mc_std_error", "one_norm_bound"), rows)


_HP_HEADER = ("n_a", "n_b", "n_c", "n_d", "m_a", "m_b", "d", "dt_a", "dt_b", "margin",
              "purity_ac", "purity_c_over_da", "cmi2", "purity_ac_exact", "purity_c_over_da_exact",
              "cmi2_exact", "mc_purity_ac", "mc_purity_ac_se", "mc_purity_c_over_da",
              "mc_purity_c_over_da_se", "mc_cmi2", "mc_cmi2_se", "ek_bound_sq")


def _hp_row(cfg, samples, g):
    from .decoupling import (decoupling_margin, ek_consistency_check, hp_cmi2, hp_cmi2_exact,
                             hp_monte_carlo, hp_purities, hp_purities_exact)
    ac, c = hp_purities(cfg)
    ace, ce = hp_purities_exact(cfg)
    mc = hp_monte_carlo(cfg, samples, g)
    return (cfg.n_a, cfg.n_b, cfg.n_c, cfg.n_d, cfg.m_a, cfg.m_b, cfg.d, cfg.dt_a, cfg.dt_b,
            decoupling_margin(cfg), ac, c, hp_cmi2(cfg), ace, ce, hp_cmi2_exact(cfg),
            mc.purity_ac, mc.purity_ac_se, mc.purity_c_over_da, mc.purity_c_over_da_se,
            mc.cmi2, mc.cmi2_se, ek_consistency_check(cfg).lhs)


def _hp_config(p, n_c=None):
    from .decoupling import HpConfig
    n_c = p["n_c"] if n_c is None else n_c
    n_d = p["n_d"] if n_c == p["n_c"] else p["n_a"] + p["n_b"] - n_c
    return HpConfig(p["n_a"], p["n_b"], n_c, n_d, p["m_a"], p["m_b"])


def _exp_hp(run: _Run):
    from .decoupling import decoupling_report
    p, seed = run.cfg.params, run.cfg.ensemble.seed
    cfg = _hp_config(p)
    run.table("hp.csv", _HP_HEADER,
              [_hp_row(cfg, p["samples"], rngmod.substream(seed, rngmod.MONTE_CARLO, 0))])
    run.summary["report"] = decoupling_report(cfg).to_record()


def _exp_hp_scan(run: _Run):
    p, seed = run.cfg.params, run.cfg.ensemble.seed
    n = p["n_a"] + p["n_b"]
    rows = []
    for n_c in range(n + 1):
        cfg = _hp_config(p, n_c)
        if cfg.validate():
            continue
        rows.append(_hp_row(cfg, p["samples"], rngmod.substream(seed, rngmod.MONTE_CARLO, n_c)))
    run.table("hp_scan.csv", _HP_HEADER, rows)


def _exp_kl(run: _Run):
    from .decoupling import kl_statistics, kl_variance_slope
    from .hilbert import PauliString
    p, seed = run.cfg.params, run.cfg.ensemble.seed
    charge = None if p["charge"] == "none" else int(p["charge"])
    sizes = [int(s) for s in p["sizes"].split(",")]
    rows, Ls, vs = [], [], []
    for D in sizes:
        op = PauliString(p["pauli"].upper().ljust(D, "I")).matrix()
        s = kl_statistics(op, p["codeword_a"], p["codeword_b"], p["samples"],
                          rngmod.substream(seed, rngmod.MONTE_CARLO, D), charge)
        rows.append((1 << D, s.dimension, s.mean.real, s.mean.imag, s.mean_se, s.variance,
                     s.variance_se, s.predicted_variance, s.exact_variance))
        Ls.append(s.dimension)
        vs.append(s.variance)
    run.table("kl.csv", ("L", "code_space_dim", "mean_re", "mean_im", "mean_std_error", "variance",
                         "variance_std_error", "predicted_variance", "exact_variance"), rows)
    if len(sizes) > 1 and min(vs) > 0:
        run.summary["variance_slope"] = kl_variance_slope(Ls, vs)


def _exp_ek_scan(run: _Run):
    from .decoupling import HpConfig, ek_consistency_check
    rows = []
    for n_a in (1, 2, 3):
        for n_d in range(4, 11):
            for m_a in range(n_a + 1):
                cfg = HpConfig(n_a, 3 * n_d - n_a, 2 * n_d, n_d, m_a, n_d - m_a)
                chk = ek_consistency_check(cfg)
                rows.append((cfg.n_a, cfg.n_b, cfg.n_c, cfg.n_d, cfg.m_a, cfg.m_b, chk.lhs, chk.rhs,
                             chk.satisfied))
    run.table("ek_scan.csv", ("n_a", "n_b", "n_c", "n_d", "m_a", "m_b", "ek_bound_sq", "margin",
                              "satisfied"), rows)
    run.summary["violations"] = sum(1 for r in rows if not r[-1])


EXPERIMENT_FUNCS = {
    "dos": _exp_dos, "sff": _exp_sff, "sff-sectors": _exp_sff_sectors, "r2-check": _exp_r2_check,
    "r4-check": _exp_r4_check, "fp": _exp_fp, "fp-analytic": _exp_fp_analytic, "kinv": _exp_kinv,
    "otoc": _exp_otoc, "page": _exp_page, "hp": _exp_hp, "hp-scan": _exp_hp_scan, "kl": _exp_kl,
    "ek-scan": _exp_ek_scan,
}


# ---------------------------------------------------------------- plots

def _plot(run: _Run) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("warning: matplotlib is not installed; skipping plots", file=sys.stderr)
        return
    for name in run.files:
        if name not in run.log_axes:
            continue
        s = ObservableSeries.from_csv(os.path.join(run.cfg.output, name))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.errorbar(s.times, s.values, yerr=s.std_errors, lw=1, ms=2, marker="o")
        ax.set_xscale("log")
        if run.log_axes[name] and np.all(s.values[np.isfinite(s.values)] > 0):
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_title(name[:-4])
        fig.tight_layout()
        fig.savefig(os.path.join(run.cfg.output, name[:-4] + ".png"), dpi=120)
        plt.close(fig)


# ---------------------------------------------------------------- entry points

def run(cfg: RunConfig, workers: int | None = None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    from .config import validate
    diags = validate(cfg)
    if diags:
        for f, m in diags:
            print(f"error: {f}: {m}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.experiment == "moment":
        print(moment_text(cfg.params["wiring"]))
        return 0
    workers = rngmod.default_workers() if workers is None else max(1, int(workers))
    r = _Run(cfg, workers)
    try:
        EXPERIMENT_FUNCS[cfg.experiment](r)
    except ConfigError as exc:
        for f, m in exc.diagnostics:
            print(f"error: {f}: {m}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, ArithmeticError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: params: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with open(os.path.join(cfg.output, "manifest.json"), "w") as f:
        json.dump(r.manifest(), f, sort_keys=True, indent=2)
        f.write("\n")
    if cfg.plot:
        _plot(r)
    print(f"wrote {len(r.files)} file(s) to {cfg.output}")
    for key, value in sorted(r.summary.items()):
        print(f"  {key}: {json.dumps(_clean(value), sort_keys=True)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chargechaos",
        description="Run a chaos or decoupling experiment and write CSV artifacts.")
    ap.add_argument("experiment", choices=EXPERIMENTS + ("run",),
                    help="experiment name; 'run' takes it from --config")
    ap.add_argument("wiring", nargs="?", help="for 'moment': e.g. \"p=2 wiring {1,2,1,2}\"")
    ap.add_argument("--config", help="flat key = value file or a manifest.json")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key (repeatable)")
    ap.add_argument("--ensemble", help="haar, u1_haar, gue_per_sector or csyk")
    ap.add_argument("--n", type=str, help="qubits, or Dirac fermions for csyk")
    ap.add_argument("--realizations", type=str)
    ap.add_argument("--seed", type=str)
    ap.add_argument("--t", help="time grid t_min:t_max:log|linear:points")
    ap.add_argument("--k", type=str, help="moment order for fp and kinv")
    ap.add_argument("--statistic", help="form factor kind for sff (R2, R4, P2, ...)")
    ap.add_argument("--operators", help="comma separated Pauli strings for otoc")
    ap.add_argument("--samples", type=str, help="Monte Carlo samples for page, hp, kl")
    ap.add_argument("--output", help="output directory")
    ap.add_argument("--plot", action="store_true", help="also render PNG plots")
    ap.add_argument("--large", action="store_true",
                    help="figure-parity sizes and realization counts (slow)")
    ap.add_argument("--workers", type=int, help="worker threads (default from CHARGECHAOS_WORKERS)")
    ap.add_argument("--check", action="store_true", help="validate the config and exit")
    ap.add_argument("--version", action="version", version=__version__)
    return ap


def config_from_args(args) -> tuple:
    """(RunConfig or None, diagnostics) from parsed arguments."""
    raw = {}
    try:
        if args.config:
            raw.update(read_flat(args.config))
        if args.experiment != "run":
            raw["experiment"] = args.experiment
        for name in ("ensemble", "n", "realizations", "seed", "k", "statistic", "operators",
                     "samples", "output"):
            v = getattr(args, name)
            if v is not None:
                raw[name] = v
        if args.t:
            raw.update(parse_time_spec(args.t))
        if args.plot:
            raw["plot"] = "true"
        if args.wiring is not None:
            raw["wiring"] = args.wiring
        for item in args.set:
            if "=" not in item:
                return None, [("--set", f"expected KEY=VALUE, got {item!r}")]
            key, value = item.split("=", 1)
            if key.strip() == "t":
                raw.update(parse_time_spec(value.strip()))
            else:
                raw[key.strip()] = value.strip()
    except (OSError, ValueError, KeyError) as exc:
        return None, [("config", str(exc))]
    if "experiment" not in raw:
        return None, [("experiment", "not given on the command line or in the config")]
    if args.large:
        # --large replaces the desk defaults but not explicit values
        for key, value in LARGE.get(raw["experiment"], {}).items():
            raw.setdefault(key, value)
    return resolve(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg, diags = config_from_args(args)
    if diags:
        for f, m in diags:
            print(f"error: {f}: {m}", file=sys.stderr)
        return EXIT_CONFIG
    if args.check:
        print("config ok")
        return 0
    return run(cfg, args.workers)


if __name__ == "__main__":
    sys.exit(main())
