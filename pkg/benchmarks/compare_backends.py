"""Compare the numba kernels against the pure-numpy fallback.

Two parts:

* kernel timings, in process: both implementations of each hot loop are
  importable side by side, so they are timed on identical inputs and their
  outputs are checked for agreement;
* end to end: ``python -m allocflow bench`` is run once per backend (chosen
  by ALLOCFLOW_DISABLE_NUMBA) and median solve times are set side by side.

Usage: python3 benchmarks/compare_backends.py [--n1 10] [--n2-grid 100,200,400,800]
"""

import argparse
import csv
import io
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from allocflow import _kernels as K


def best_of(fn, repeat=5):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_section():
    rng = np.random.default_rng(0)
    print("kernel                      size            numba        numpy    speedup")

    for n, m in ((60, 600), (200, 4000)):
        tail = rng.integers(0, n, m).astype(np.int64)
        head = rng.integers(0, n, m).astype(np.int64)
        cost = rng.integers(-50, 100, m).astype(np.int64)
        K.karp_min_mean_nb(n, tail, head, cost)  # compile
        t_nb, a = best_of(lambda: K.karp_min_mean_nb(n, tail, head, cost))
        t_np, b = best_of(lambda: K.karp_min_mean_np(n, tail, head, cost))
        assert a[0].tolist() == b[0].tolist() and a[1:] == b[1:]
        print(f"karp_min_mean               n={n:<4} m={m:<6}{t_nb:>10.5f}s {t_np:>10.5f}s"
              f" {t_np / t_nb:>8.1f}x")

        # negative-cost DAG: long relaxation chains but no cycle to stop early
        lo, hi = np.minimum(tail, head), np.maximum(tail, head)
        keep = lo < hi
        dt, dh, dc = lo[keep], hi[keep], -np.abs(cost[keep]) - 1
        K.bellman_ford_cycle_nb(n, dt, dh, dc)
        t_nb, a = best_of(lambda: K.bellman_ford_cycle_nb(n, dt, dh, dc))
        t_np, b = best_of(lambda: K.bellman_ford_cycle_np(n, dt, dh, dc))
        assert len(a) == len(b) == 0
        print(f"bellman_ford (DAG)          n={n:<4} m={m:<6}{t_nb:>10.5f}s {t_np:>10.5f}s"
              f" {t_np / t_nb:>8.1f}x")

    n_obs, n_arms, reps = 600, 60, 256
    values = rng.normal(size=n_obs)
    arm_of = np.sort(rng.integers(0, n_arms, n_obs)).astype(np.int64)
    arm_size = np.bincount(arm_of, minlength=n_arms).astype(float)
    pa, pb = np.triu_indices(n_arms, 1)
    pa, pb = pa.astype(np.int64), pb.astype(np.int64)
    w = np.full(len(pa), 1.0 / len(pa))
    perms = np.array([rng.permutation(n_obs) for _ in range(reps)], dtype=np.int64)
    args = (values, perms, arm_of, arm_size, pa, pb, w)
    K.replicate_stats_nb(*args)
    t_nb, a = best_of(lambda: K.replicate_stats_nb(*args))
    t_np, b = best_of(lambda: K.replicate_stats_np(*args))
    np.testing.assert_allclose(a, b, rtol=1e-10)
    print(f"replicate_stats             {reps} x {n_obs:<6}{t_nb:>10.5f}s {t_np:>10.5f}s"
          f" {t_np / t_nb:>8.1f}x")


def run_bench(disable_numba, argv):
    env = {**os.environ, "ALLOCFLOW_DISABLE_NUMBA": "1" if disable_numba else "0"}
    proc = subprocess.run([sys.executable, "-m", "allocflow", "bench", *argv],
                          capture_output=True, text=True, env=env, check=True)
    return list(csv.DictReader(io.StringIO(proc.stdout)))


def end_to_end_section(args):
    argv = ["--n1", str(args.n1), "--n2-grid", args.n2_grid, "--rule", "both",
            "--repetitions", str(args.repetitions), "--seed", str(args.seed)]
    results = {b: run_bench(b == "numpy", argv) for b in ("numba", "numpy")}
    for backend, rows in results.items():
        assert {r["backend"] for r in rows} == {backend}, "backend flag not honored"

    def medians(rows):
        cells = {}
        for r in rows:
            cells.setdefault((r["rule"], int(r["n2"])), []).append(float(r["seconds"]))
        return {k: statistics.median(v) for k, v in cells.items()}

    med = {b: medians(rows) for b, rows in results.items()}
    totals = {b: [(r["rule"], r["n2"], r["rep"], r["total"]) for r in rows]
              for b, rows in results.items()}
    print()
    print(f"solve, n1={args.n1}          n2         numba        numpy    speedup")
    for key in sorted(med["numba"]):
        a, b = med["numba"][key], med["numpy"][key]
        print(f"{key[0]:<24}{key[1]:>6}{a:>12.4f}s {b:>10.4f}s {b / a:>8.1f}x")
    same = totals["numba"] == totals["numpy"]
    print(f"\nobjective values identical across backends: {same}")
    return same


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2-grid", default="100,200,400,800")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-kernels", action="store_true")
    args = p.parse_args()
    if not K.USE_NUMBA:
        sys.exit("numba is disabled or missing in this process; unset ALLOCFLOW_DISABLE_NUMBA")
    if not args.skip_kernels:
        kernel_section()
    return 0 if end_to_end_section(args) else 1


if __name__ == "__main__":
    sys.exit(main())
