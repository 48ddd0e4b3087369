#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times each hot kernel on representative sizes plus a full closed-loop episode,
and cross-checks that both backends produce the same numbers while at it.

Run: python benchmarks/bench_backends.py [--agents 50 100] [--steps 200]
"""

import argparse
import time

import numpy as np

from swarmnn import _backend, seeding
from swarmnn.dynamics import SimConfig, init_flock_disc
from swarmnn.evaluation import run_episode, velocity_variance_cost
from swarmnn import mlp


def time_call(fn, *args, repeats=200):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(n_agents, rng):
    cfg = SimConfig(n_agents=n_agents, rng_seed=0)
    state = init_flock_disc(cfg, rng)
    pos, vel = state.positions, state.velocities
    results = {}
    reference = {}
    for name in _backend.available_backends():
        with _backend.use_backend(name) as impl:
            indptr, indices = impl.radius_edges(pos, 1.5)
            data = np.full(indices.shape[0], 0.25)
            feats = impl.flock_features(pos, vel, indptr, indices, 1e-3)
            rows = {
                "radius_edges": time_call(impl.radius_edges, pos, 1.5),
                "flock_features": time_call(impl.flock_features, pos, vel,
                                            indptr, indices, 1e-3),
                "controller_sums": time_call(impl.controller_sums, pos, vel,
                                             indptr, indices, 1.0, 1e-3),
                "csr_apply": time_call(impl.csr_apply, indptr, indices, data, feats),
                "min_neighbor_dists": time_call(impl.min_neighbor_dists, pos),
            }
            results[name] = rows
            reference[name] = impl.controller_sums(pos, vel, indptr, indices, 1.0, 1e-3)
    names = sorted(reference)
    if len(names) == 2:
        gap = float(np.abs(reference[names[0]] - reference[names[1]]).max())
        assert gap <= 1e-12, f"backends disagree by {gap}"
    return results


def bench_episode(n_agents, steps):
    cfg = SimConfig(n_agents=n_agents, rng_seed=0)
    model = mlp.init_params(mlp.MlpArchitecture(3, 6, (32, 32), 2),
                            np.random.default_rng(0))
    results = {}
    costs = {}
    for name in _backend.available_backends():
        with _backend.use_backend(name):
            initial = init_flock_disc(cfg, seeding.rng_for(0, seeding.EVAL_EPISODE, 0))
            start = time.perf_counter()
            log = run_episode(initial, "gnn", cfg, steps, model=model)
            results[name] = time.perf_counter() - start
            costs[name] = velocity_variance_cost(log)
    names = sorted(costs)
    if len(names) == 2:
        a, b = costs[names[0]], costs[names[1]]
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a)), f"episode costs differ: {costs}"
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", type=int, nargs="+", default=[50, 100])
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args()

    available = _backend.available_backends()
    print(f"backends available: {', '.join(available)}")
    if "compiled" not in available:
        print("compiled extension not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    for n in args.agents:
        print(f"\n== kernels, N={n} (best of 200, microseconds) ==")
        results = bench_kernels(n, rng)
        kernels = list(next(iter(results.values())))
        header = f"{'kernel':<20}" + "".join(f"{name:>12}" for name in available)
        if len(available) == 2:
            header += f"{'speedup':>10}"
        print(header)
        for kernel in kernels:
            row = f"{kernel:<20}"
            for name in available:
                row += f"{results[name][kernel] * 1e6:12.1f}"
            if len(available) == 2:
                ratio = results["python"][kernel] / results["compiled"][kernel]
                row += f"{ratio:9.1f}x"
            print(row)

    print(f"\n== full gnn episode, {args.steps} steps (seconds) ==")
    for n in args.agents:
        results = bench_episode(n, args.steps)
        row = f"N={n:<6}"
        for name in available:
            row += f"{name}={results[name]:.3f}s  "
        if len(available) == 2:
            row += f"speedup={results['python'] / results['compiled']:.1f}x"
        print(row)


if __name__ == "__main__":
    main()
