"""Timing comparison of the pure-Python and compiled replay paths.

Generates one synthetic day, replays it under each policy on both
backends, and prints per-policy wall times plus the speedup. The two
backends must agree bit for bit; the script asserts that while timing.

Usage:
    python3 benchmarks/bench_replay.py [--requests 10000] [--repeats 3]
"""

import argparse
import time

from adalloc.core import DualParams
from adalloc.datagen import GenSpec, generate
from adalloc.duals import make_python_evaluator, train_iterative
from adalloc.engine import make_evaluator, make_native_evaluator, native_available
from adalloc.policies import ot_train
from adalloc.replay import PolicyParams, replay


def best_of(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--campaigns", type=int, default=200)
    parser.add_argument("--requests", type=int, default=10_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not native_available():
        print("compiled kernel not available; build it first"
              " (pip install -e . --no-build-isolation)")
        return 1

    spec = GenSpec(seed=args.seed, n_campaigns=args.campaigns,
                   n_requests=args.requests)
    campaigns, requests, config = generate(spec)
    print(f"instance: {len(campaigns)} campaigns, {len(requests)} requests,"
          f" P={config.P}")

    evaluator = make_evaluator(requests, campaigns, config)
    trained = train_iterative(requests, campaigns, config,
                              evaluator=evaluator, epochs=40)
    thresholds = ot_train(requests, campaigns, config)
    cases = [("ghp", None),
             ("ot", PolicyParams(thresholds=thresholds)),
             ("lp", PolicyParams(duals=trained.duals))]

    header = f"{'workload':<14}{'pure':>12}{'native':>12}{'speedup':>10}"
    print()
    print(header)
    print("-" * len(header))
    for policy, params in cases:
        t_pure, pure = best_of(
            lambda: replay(requests, campaigns, policy, params, config,
                           backend="pure"), args.repeats)
        t_nat, nat = best_of(
            lambda: replay(requests, campaigns, policy, params, config,
                           backend="native"), args.repeats)
        assert nat == pure, f"backend mismatch for {policy}"
        print(f"{'replay ' + policy:<14}{t_pure * 1e3:>10.1f}ms"
              f"{t_nat * 1e3:>10.1f}ms{t_pure / t_nat:>9.1f}x")

    py_eval = make_python_evaluator(requests, campaigns, config)
    nat_eval = make_native_evaluator(requests, campaigns, config)
    duals = trained.duals if trained.duals.alpha else DualParams()
    t_pure, s_pure = best_of(lambda: py_eval(duals), args.repeats)
    t_nat, s_nat = best_of(lambda: nat_eval(duals), args.repeats)
    assert s_nat == s_pure, "evaluator mismatch"
    print(f"{'train epoch':<14}{t_pure * 1e3:>10.1f}ms"
          f"{t_nat * 1e3:>10.1f}ms{t_pure / t_nat:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
