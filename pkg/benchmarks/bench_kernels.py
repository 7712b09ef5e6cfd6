"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on identical inputs through both backends; the script
reports the best wall time of ``repeat`` runs, the speedup and the largest
difference between the two outputs.
"""
import argparse
import sys
import timeit

import numpy as np

from chargechaos import rng as rngmod
from chargechaos._kernels import compiled_backend, python_backend
from chargechaos.ensembles import EnsembleSpec, sample_syk_couplings, spectral_ensemble, \
    syk_transition_table
from chargechaos.series import time_grid


def _cases():
    se = spectral_ensemble(EnsembleSpec("csyk", 10, seed=3, realizations=100))
    times = time_grid(0.1, 100.0, 64, "log")
    orders = np.array([1, 2], dtype=np.int64)
    yield ("power_sums csyk N=10, R=100, T=64",
           lambda b: b.power_sums(np.ascontiguousarray(se.eigenvalues), se.offsets, times, orders))
    for N in (10, 12):
        table = syk_transition_table(N)
        c = sample_syk_couplings(N, 1.0, rngmod.substream(0, rngmod.SYK, 0))
        pairs = np.ascontiguousarray(c.pairs.ravel())
        yield (f"syk_assemble N={N} ({len(table.target)} terms)",
               lambda b, t=table, p=pairs: b.syk_assemble(p, t.target, t.cidx, t.coef, t.size))
    yield ("lis_count k=8, L=3", lambda b: b.lis_count(8, 3))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled_backend is None:
        print("compiled extension not built; only the python backend is available")
        return 1
    print(f"{'kernel':42s} {'python':>10s} {'compiled':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in _cases():
        out_py, out_c = fn(python_backend), fn(compiled_backend)
        diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_c))))
        t_py = min(timeit.repeat(lambda: fn(python_backend), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(compiled_backend), number=1, repeat=args.repeat))
        print(f"{name:42s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_py / t_c:7.1f}x {diff:10.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
