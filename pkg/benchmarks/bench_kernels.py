"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--paths 2000] [--steps 2000] [--repeat 3]

Each case is run once to trigger compilation, then timed ``--repeat`` times;
the best time and ns per path-step are reported, along with the largest
difference between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from harnack_lab import scenario as S
from harnack_lab.integrator import noise_block, time_grid
from harnack_lab.kernels import _numba, _numpy
from harnack_lab.operators import ConvexSet, MonotoneOperator


def cases(dim: int):
    base = S.reflected_ou(dim)
    yield "reflected_ou", base
    yield "ball", base.replace(operator=MonotoneOperator.normal_cone(ConvexSet.ball(np.zeros(dim), 2.0)))
    yield "soft_threshold", base.replace(operator=MonotoneOperator.scaled_subgradient_abs(dim, 0.5))
    yield "power_drift", base.replace(drift=S.DriftSpec.power_dissipative(dim, 4.0, 1.0))


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    T = 1.0
    times, hs = time_grid(T, T / args.steps)
    z = noise_block(0, np.arange(args.paths), len(hs), args.dim)
    x0 = np.full(args.dim, 0.5)
    work = args.paths * len(hs)
    print(f"{'case':<16}{'kernel':<10}{'numba s':>10}{'numpy s':>10}{'ns/step nb':>12}{'speedup':>9}{'max diff':>11}")
    for name, sc in cases(args.dim):
        scale = np.full(len(times), 0.5)
        jobs = {
            "terminal": lambda be: be.terminal(sc, x0, z, hs),
            "coupled": lambda be: be.coupled(sc, x0, x0 + 0.5, z, hs, times, scale, 0.5, 0.02, False)["x_T"],
        }
        for kname, job in jobs.items():
            t_nb, a = best_of(lambda: job(_numba), args.repeat)
            t_np, b = best_of(lambda: job(_numpy), args.repeat)
            print(f"{name:<16}{kname:<10}{t_nb:>10.4f}{t_np:>10.4f}{1e9 * t_nb / work:>12.1f}"
                  f"{t_np / t_nb:>9.1f}{np.max(np.abs(a - b)):>11.2e}")


if __name__ == "__main__":
    main()
