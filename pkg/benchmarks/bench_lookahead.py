"""Compare the compiled and pure-Python lookahead backends.

Times the bare tree search on random stage matrices for several horizons,
then one full controller run over the bundled diurnal trace per backend.

    python benchmarks/bench_lookahead.py [--repeats 5] [--skip-run]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mecsim import kernels, simulator
from mecsim.traces import SystemParams, bundled_trace


def random_stages(rng, T, k):
    stages = [rng.uniform(50.0, 1300.0, (1, k))]
    stages += [rng.uniform(50.0, 1300.0, (k, k)) for _ in range(T - 1)]
    return stages


def time_search(backend, T, k, repeats, seed=0):
    rng = np.random.default_rng(seed)
    p = SystemParams()
    cases = [(random_stages(rng, T, k), rng.uniform(0.0, 500.0, T)) for _ in range(repeats)]
    start = time.perf_counter()
    results = [kernels.tree_search(s, h, p.B_up, p.B_low, p.B_up, p.B_max, backend=backend)
               for s, h in cases]
    return (time.perf_counter() - start) / repeats, results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--candidates", type=int, default=9)
    ap.add_argument("--skip-run", action="store_true")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'T':>2} {'nodes':>9} " + " ".join(f"{b + ' (ms)':>15}" for b in backends) + "  speedup")
    for T in (2, 3, 4, 5):
        row, outs = {}, {}
        for b in backends:
            row[b], outs[b] = time_search(b, T, args.candidates, args.repeats)
        if len(outs) == 2 and outs["python"] != outs["compiled"]:
            raise SystemExit(f"backends disagree at T={T}")
        nodes = sum(args.candidates ** n for n in range(1, T + 1))
        speed = row["python"] / row["compiled"] if "compiled" in row else float("nan")
        print(f"{T:>2} {nodes:>9} " + " ".join(f"{1e3 * row[b]:>15.3f}" for b in backends)
              + f"  {speed:7.1f}x")

    if args.skip_run:
        return
    trace = bundled_trace("diurnal")
    fore = simulator.build_forecaster(trace)
    print("\nfull run, bundled diurnal trace, horizon 3 (forecaster trained once)")
    for b in backends:
        start = time.perf_counter()
        recs = simulator.run(trace, "arces", fore, backend=b)
        elapsed = time.perf_counter() - start
        print(f"  {b:>9}: {elapsed:6.2f} s  mean savings {simulator.metrics(recs).mean_savings:.6f}%")


if __name__ == "__main__":
    main()
