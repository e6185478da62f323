"""Time the numpy and numba kernel backends against each other.

    python benchmarks/bench_kernels.py [--families 1000] [--repeats 20]

Reports per-kernel step timings on one sampled world and the wall time of a
batch of full replications, and checks both backends agree bit for bit.
"""

import argparse
import time

import numpy as np

from vida import _kernels
from vida.domain import SimParams
from vida.engine import new_metrics, run_batch, step
from vida.population import sample_population, synthetic_profile


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def time_steps(kernels, params, families, repeats):
    profile = synthetic_profile(num_families_sample=families)
    world = sample_population(profile, params, np.random.default_rng(0))
    coef = _kernels.pack_coefficients(params)

    def run():
        w = world.copy()
        step(w, params, np.random.default_rng(1), new_metrics(w), kernels, coef)

    run()  # warm-up (JIT compile or cache load)
    return best_of(run, repeats)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--areas", type=int, default=4)
    ap.add_argument("--replications", type=int, default=25)
    args = ap.parse_args(argv)

    backends = {"numpy": _kernels.NUMPY}
    if _kernels.NUMBA_AVAILABLE:
        backends["numba"] = _kernels.NUMBA
    else:
        print("numba not installed; timing numpy only")

    params = SimParams(replications=args.replications)
    profiles = [synthetic_profile(area_id=f"b{i}", num_families_sample=args.families) for i in range(args.areas)]
    results = {}
    print(f"{'backend':8} {'step (ms)':>10} {'batch (s)':>10}")
    for name, kernels in backends.items():
        step_s = time_steps(kernels, params, args.families, args.repeats)
        run_batch(profiles[:1], params.replace(replications=1), threads=1, kernels=kernels)
        t0 = time.perf_counter()
        results[name] = run_batch(profiles, params, threads=1, kernels=kernels)
        batch_s = time.perf_counter() - t0
        print(f"{name:8} {step_s * 1e3:10.3f} {batch_s:10.3f}")

    if len(results) == 2:
        same = results["numpy"] == results["numba"]
        print(f"backends agree: {same}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
