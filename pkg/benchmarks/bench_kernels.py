"""Compiled vs pure-Python kernel timings and agreement.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from isq import _kernels


def cases(rng):
    n, m = 12, 64
    amp = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    env = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    maps = rng.integers(0, 10_000, size=(100_000, 10), dtype=np.int64)
    y = rng.standard_normal((20_000, 3))
    S, steps = 2000, 500
    x0 = np.ones((S, 1))
    jitter = 0.1 * rng.standard_normal((steps, S, 1))

    def verlet(mod):
        x, v = x0.copy(), np.zeros_like(x0)
        f = mod.polynomial_force(x, 1.0, 0.1)
        return mod.verlet_ensemble(x, v, f, jitter, 1e-3, 1.0, 0.1, 1.0)

    return {
        "env_marginal (12x64)": lambda mod: mod.env_marginal(amp, env),
        "count_injective (1e5 maps)": lambda mod: mod.count_injective(maps, 10_000),
        "polynomial_force (2e4x3)": lambda mod: mod.polynomial_force(y, 1.0, 0.1),
        "verlet_ensemble (500 steps x 2000)": verlet,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.compiled is None:
        print("compiled extension not built; only the Python backend is available")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36}{'cython [ms]':>12}{'python [ms]':>12}{'speedup':>9}{'max |diff|':>12}")
    for name, fn in cases(rng).items():
        tc = min(timeit.repeat(lambda: fn(_kernels.compiled), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(_kernels.python), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(fn(_kernels.compiled)) - np.asarray(fn(_kernels.python)))))
        print(f"{name:<36}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>9.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
