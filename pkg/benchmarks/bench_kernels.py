"""Numba against numpy for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--end-to-end]

Both versions of each kernel are importable in one process, so the table
compares them directly on identical inputs (numba timings exclude the first,
compiling call). ``--end-to-end`` also times a short ``l96emu generate`` in
subprocesses with and without ``L96EMU_DISABLE_NUMBA=1``.
"""
import argparse
import os
import subprocess
import sys
import tempfile
import time
import timeit
from pathlib import Path

import numpy as np
import yaml

from l96emu import dynamics as dyn, esn, metrics


def best_of(fn, repeat):
    fn()  # warm-up: numba compiles (or loads its cache) here
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_integrate(repeat):
    p = dyn.ModelParams()
    s0 = dyn.random_initial_state(p, np.random.default_rng(0)).flat()
    dims = dyn._dims(p)
    out = {}
    for name, kern, steps in (("numba", dyn._integrate_nb, 2000), ("numpy", dyn._integrate_np, 200)):
        buf = np.empty((steps, p.K))
        t = best_of(lambda: kern(s0.copy(), 0.005, 0, steps, buf, *dims), repeat)
        out[name] = t / steps
    return "RK4 step, 584 variables", out


def _reservoir(D):
    m = esn.build(esn.EsnConfig(D=D, seed=0), K=8)
    m.W_out = np.random.default_rng(1).normal(size=(8, D)) * 1e-3
    return m


def bench_drive(repeat, D=2000, n=2000):
    m = _reservoir(D)
    U = np.random.default_rng(2).normal(size=(n, 8)) @ m.W_in.T
    states = np.empty((n, D))
    A = m.A
    out = {
        "numba": best_of(lambda: esn._drive_nb(A.indptr, A.indices, A.data, U,
                                               np.zeros(D), states), repeat) / n,
        "numpy": best_of(lambda: esn._drive_np(A, U, np.zeros(D), states), repeat) / n,
    }
    return f"ESN teacher-forced step, D={D}", out


def bench_rollout(repeat, D=2000, n=2000):
    m = _reservoir(D)
    x0 = np.random.default_rng(3).normal(size=8)
    buf = np.empty((n, 8))
    A = m.A
    code = esn.TRANSFORMS["T2"]
    out = {
        "numba": best_of(lambda: esn._rollout_nb(A.indptr, A.indices, A.data, m.W_in, m.W_out,
                                                 np.zeros(D), x0, code, buf), repeat) / n,
        "numpy": best_of(lambda: esn._rollout_np(A, m.W_in, m.W_out, np.zeros(D), x0, code,
                                                 buf), repeat) / n,
    }
    return f"ESN closed-loop step, D={D}", out


def bench_kde(repeat, n=800_000, points=401):
    x = np.sort(np.random.default_rng(4).normal(size=n))
    grid = np.linspace(-5, 5, points)
    h = metrics.silverman_bandwidth(x)
    out = {
        "numba": best_of(lambda: metrics._epan_nb(x, grid, h), repeat),
        "numpy": best_of(lambda: metrics._epan_np(x, grid, h), repeat),
    }
    return f"Epanechnikov KDE, {n} samples x {points} points", out


def end_to_end(steps=100_000):
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        conf = Path(tmp) / "c.yaml"
        conf.write_text(yaml.safe_dump({"data": {"n_steps": steps, "spinup_steps": 0}}))
        for flag in ("0", "1"):
            env = dict(os.environ, L96EMU_DISABLE_NUMBA=flag)
            t = time.perf_counter()
            subprocess.run([sys.executable, "-m", "l96emu.cli", "generate", "--config",
                            str(conf), "--out", str(Path(tmp) / flag)], env=env, check=True,
                           stdout=subprocess.DEVNULL)
            rows.append((flag, time.perf_counter() - t))
    print(f"\nend to end: generate {steps} steps")
    for flag, t in rows:
        print(f"  L96EMU_DISABLE_NUMBA={flag}: {t:.1f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    print(f"{'kernel':<48}{'numba':>12}{'numpy':>12}{'speed-up':>10}")
    for bench in (bench_integrate, bench_drive, bench_rollout, bench_kde):
        label, t = bench(args.repeat)
        print(f"{label:<48}{t['numba'] * 1e6:>10.1f}us{t['numpy'] * 1e6:>10.1f}us"
              f"{t['numpy'] / t['numba']:>9.1f}x")
    if args.end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()
