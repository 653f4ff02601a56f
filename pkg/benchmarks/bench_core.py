"""Time the compiled hot loops against their pure-Python fallbacks.

Run with ``python benchmarks/bench_core.py``; inputs are fixed so timings
are comparable between machines and builds.
"""

import argparse
import timeit

import numpy as np

from nearcrit import _pycore

try:
    from nearcrit import _core
except ImportError:  # extension not built
    _core = None


def cases(size):
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 100, size))
    th = rng.uniform(0, 3, size)
    events = np.sort(rng.uniform(0, 100, size // 4))
    query = np.sort(rng.uniform(0, 100, size))
    n = max(size // 20, 50)
    w = rng.uniform(0, 0.01, n)
    f = rng.uniform(0, 1, n)
    return {
        "sweep_slab": lambda mod: mod.sweep_slab(0, t, th, 1.0, 0.97, 1.3, np.zeros(3), 1e9),
        "intensity_at": lambda mod: mod.intensity_at(1, events, 1.0, 0.99, 2.0, query),
        "volterra_forward": lambda mod: mod.volterra_forward(w, f),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=20_000, help="field points per call")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    print(f"{'kernel':<18}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, call in cases(args.size).items():
        py = best_time(lambda: call(_pycore), args.repeat)
        if _core is None:
            print(f"{name:<18}{py * 1e3:>14.3f}{'n/a':>16}{'n/a':>10}")
            continue
        c = best_time(lambda: call(_core), args.repeat)
        print(f"{name:<18}{py * 1e3:>14.3f}{c * 1e3:>16.3f}{py / c:>9.1f}x")


if __name__ == "__main__":
    main()
