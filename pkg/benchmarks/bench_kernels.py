"""Benchmark the compiled scan kernels against the numpy fallback.

Each workload runs in a fresh subprocess with LEVYDETECT_KERNELS forcing the
backend, so import-time selection is exercised exactly as in production.

Usage: python benchmarks/bench_kernels.py [--reps N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, sys, time
import numpy as np
from levydetect.families import LevySpec, GaussianJumps
from levydetect.model import build_change_model
from levydetect.detector import DetectorConfig
from levydetect.evaluate import estimate_arl, lower_bound_ratio
from levydetect.kernels import backend

name, n_rep = sys.argv[1], int(sys.argv[2])
bm = build_change_model(LevySpec.brownian(1.0, 0.0), LevySpec.brownian(1.0, 1.0))
pois = build_change_model(
    LevySpec.compound_poisson(1.0, GaussianJumps(0.0, 1.0)),
    LevySpec.compound_poisson(2.0, GaussianJumps(0.0, 1.0)))

def run():
    if name == "arl_fine_grid":
        cfg = DetectorConfig(rule="cusum_grid", log_barrier=2.0, delta=1e-3)
        return estimate_arl(bm, cfg, "in_control", n_rep, 200.0, 7).estimate
    if name == "arl_poisson":
        cfg = DetectorConfig(rule="cusum_grid", log_barrier=3.0, delta=0.05)
        return estimate_arl(pois, cfg, "in_control", n_rep, 4000.0, 7).estimate
    if name == "lower_bound":
        cfg = DetectorConfig(rule="cusum_grid", log_barrier=2.0, delta=0.1)
        return lower_bound_ratio(bm, cfg, 0.1, n_rep, 300.0, 7).estimate
    if name == "shiryaev_roberts":
        cfg = DetectorConfig(rule="shiryaev_roberts", log_barrier=6.0, delta=0.05)
        return estimate_arl(bm, cfg, "in_control", n_rep, 600.0, 7).estimate
    raise SystemExit(f"unknown workload {name}")

run()                      # warm the caches once
t0 = time.perf_counter()
value = run()
elapsed = time.perf_counter() - t0
print(json.dumps({"backend": backend(), "seconds": elapsed, "value": value}))
"""

WORKLOADS = ["arl_fine_grid", "arl_poisson", "lower_bound", "shiryaev_roberts"]


def run_one(workload: str, backend: str, reps: int) -> dict:
    env = dict(os.environ, LEVYDETECT_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", WORKER, workload, str(reps)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=2000,
                        help="replications per workload")
    args = parser.parse_args()

    print(f"{'workload':<20} {'compiled':>10} {'python':>10} {'speedup':>9}  agreement")
    for name in WORKLOADS:
        try:
            fast = run_one(name, "compiled", args.reps)
        except subprocess.CalledProcessError:
            print(f"{name:<20} compiled kernels unavailable; skipping")
            continue
        slow = run_one(name, "python", args.reps)
        rel = abs(fast["value"] - slow["value"]) / max(1.0, abs(slow["value"]))
        print(f"{name:<20} {fast['seconds']:>9.2f}s {slow['seconds']:>9.2f}s "
              f"{slow['seconds'] / fast['seconds']:>8.1f}x  rel diff {rel:.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
