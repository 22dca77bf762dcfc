"""Time the numpy and Cython kernel backends on the same batch.

    python benchmarks/bench_kernels.py --agents 4096 --repeat 5
"""
import argparse
import math
import timeit

import numpy as np

from trajtree import kernels


def workloads(agents, width, depth, seed):
    rng = np.random.default_rng(seed)
    roots = rng.normal(size=(agents, 2))
    forward = rng.normal(size=(agents, 2))
    angles = np.full(depth, math.pi / 6)
    steps = np.full(depth, 4)
    horizon = int(steps.sum())
    paths = kernels.expand_tree(roots, forward, angles, width, depth, 1.0)
    gt_coarse = rng.normal(size=(agents, depth, 2))
    preds = rng.normal(size=(agents, 20, horizon, 2))
    gt = rng.normal(size=(agents, horizon, 2))
    return {
        "expand_tree": lambda b: b.expand_tree(roots, forward, angles, width, depth, 1.0),
        "interpolate": lambda b: b.interpolate(roots, paths, steps),
        "breakpoint_distances": lambda b: b.breakpoint_distances(paths, gt_coarse),
        "displacement_errors": lambda b: b.displacement_errors(preds, gt),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--agents", type=int, default=4096)
    p.add_argument("--width", type=int, default=3)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
    names = sorted(backends)
    print(f"{'kernel':<22}" + "".join(f"{n + ' ms':>12}" for n in names) + f"{'speedup':>10}")
    for kernel, fn in workloads(args.agents, args.width, args.depth, args.seed).items():
        ms = {}
        for n in names:
            fn(backends[n])
            ms[n] = 1e3 * min(timeit.repeat(lambda: fn(backends[n]), number=1,
                                            repeat=args.repeat))
        speed = ms["numpy"] / ms["cython"] if "cython" in ms else float("nan")
        print(f"{kernel:<22}" + "".join(f"{ms[n]:>12.3f}" for n in names) + f"{speed:>9.2f}x")


if __name__ == "__main__":
    main()
