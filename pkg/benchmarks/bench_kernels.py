"""Compare the compiled sphere-sum kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--trials 250] [--repeat 5]

Each workload is one chunk of empirical bodies as the experiments build
them.  The table lists the best wall time per backend, the speed-up and
the largest relative difference between the two results.
"""
import argparse
import timeit

import numpy as np

from starlab import _kernels_py
from starlab.numerics import sphere_quadrature

try:
    from starlab import _kernels
except ImportError:  # pragma: no cover - extension not built
    _kernels = None


def workloads(trials, gen):
    grid = sphere_quadrature(2, 256)
    U, w = grid.nodes, grid.weights
    seg = gen.uniform(-1, 1, (trials, 8, 2))
    blocks = gen.uniform(-1, 1, (trials, 32, 3, 2))
    cols = gen.uniform(-1, 1, (trials, 32, 2))
    cm = gen.uniform(-1, 1, (trials, 8, 17, 2))
    H = np.abs(gen.normal(size=(trials, 8, 256)))
    return [
        ("segment_sums p=0.5 N=8", "segment_sums", (seg, U, w, 0.5, 2.0)),
        ("segment_sums p=0 N=8", "segment_sums", (seg, U, w, 0.0, 2.0)),
        ("ball_block_sums p=-1 N=32 m=3", "ball_block_sums", (blocks, U, w, -1.0, 2.0)),
        ("ellipsoid_sums q=1 N=32", "ellipsoid_sums", (cols, U, w, 0.2, 1.0, 2.0)),
        ("cm_alpha_block_sums m=16 N=8", "cm_alpha_block_sums", (cm, U, w, 0.2, -1.0, 2.0)),
        ("power_mean_sums p=0.5 N=8", "power_mean_sums", (H, w, 0.5, 2.0)),
    ]


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=250, help="bodies per chunk")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    gen = np.random.default_rng(args.seed)
    print(f"{'workload':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s} {'max rel diff':>13s}")
    for label, name, fargs in workloads(args.trials, gen):
        py, cy = getattr(_kernels_py, name), getattr(_kernels, name)
        t_py = best_time(py, fargs, args.repeat)
        t_cy = best_time(cy, fargs, args.repeat)
        a, b = py(*fargs)[0], cy(*fargs)[0]
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
        print(f"{label:34s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:8.1f}x {diff:13.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
