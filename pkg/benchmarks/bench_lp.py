"""Benchmark the compiled simplex kernel against the NumPy fallback.

Three workloads: dense random LPs, the arbitrage/risk-neutral programs of a
batch of randomized scenario-tree markets, and the superhedging programs of
a generated CDS market.  Both kernels take identical pivot paths, so the
comparison is pure per-pivot cost.

Usage:  python benchmarks/bench_lp.py [--repeat N]
"""

from __future__ import annotations

import argparse
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))

from _markets import random_claim, random_market  # noqa: E402

from fmkt.arbitrage import check_no_arbitrage, find_risk_neutral_measure  # noqa: E402
from fmkt.cds import load_cds_spec, make_cds_market  # noqa: E402
from fmkt.hedging import DerivativeContract, superhedge_ask  # noqa: E402
from fmkt.lp import (  # noqa: E402
    LinearProgram,
    available_kernels,
    set_kernel,
    solve_lp,
)

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def dense_random_lps(seed=7, count=120):
    rng = np.random.default_rng(seed)
    programs = []
    for _ in range(count):
        n = int(rng.integers(20, 80))
        mu = int(rng.integers(5, 25))
        x0 = rng.uniform(0.0, 2.0, n)
        a_ub = rng.normal(size=(mu, n))
        b_ub = a_ub @ x0 + rng.uniform(0.0, 1.0, mu)
        a_ub = np.vstack([a_ub, np.eye(n)])
        b_ub = np.concatenate([b_ub, np.full(n, 10.0)])
        programs.append(
            LinearProgram("max", rng.normal(size=n), a_ub=a_ub, b_ub=b_ub)
        )
    def run():
        for p in programs:
            solve_lp(p)
    return run


def market_batch(seed=11, count=120):
    rng = np.random.default_rng(seed)
    markets = [
        random_market(rng, force_na=bool(k % 2)) for k in range(count)
    ]
    def run():
        for m in markets:
            check_no_arbitrage(m)
            find_risk_neutral_measure(m)
    return run


def cds_pricing(seed=13, count=60):
    import json

    spec = load_cds_spec(json.loads((FIXTURES / "cds1_spec.json").read_text()))
    market = make_cds_market(spec)
    rng = np.random.default_rng(seed)
    claims = [
        DerivativeContract(f"c{k}", random_claim(rng, market))
        for k in range(count)
    ]
    def run():
        for d in claims:
            superhedge_ask(market, d, 0, check_na=False)
            superhedge_ask(market, d, 1, check_na=False)
    return run


def time_workload(run, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        run()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    kernels = available_kernels()
    if "compiled" not in kernels:
        print("compiled kernel not built; showing the fallback alone")

    workloads = {
        "dense random LPs (120)": dense_random_lps(),
        "market NA+RN batch (120)": market_batch(),
        "CDS superhedging (60 claims, t=0 and 1)": cds_pricing(),
    }
    results = {}
    for kernel in kernels:
        set_kernel(kernel)
        for name, run in workloads.items():
            results[(kernel, name)] = time_workload(run, args.repeat)

    width = max(len(name) for name in workloads)
    print(f"{'workload':<{width}}  " + "  ".join(f"{k:>10}" for k in kernels))
    for name in workloads:
        row = "  ".join(f"{results[(k, name)]:>9.3f}s" for k in kernels)
        print(f"{name:<{width}}  {row}")
    if "compiled" in kernels and "python" in kernels:
        print()
        for name in workloads:
            speedup = results[("python", name)] / results[("compiled", name)]
            print(f"speedup on {name}: {speedup:.1f}x")


if __name__ == "__main__":
    main()
