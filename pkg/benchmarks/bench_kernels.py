"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from roughfou import kernels
from roughfou.fbm import SampleGrid, sample_fbm
from roughfou.fou import ModelSpec, euler_simulate
from roughfou.rough import strat_lift


def cases():
    rng = np.random.default_rng(0)
    g2 = np.array([[1.0, 2.0], [2.0, 5.0]])
    for d, n in ((1, 2 ** 13), (2, 2 ** 13), (2, 2 ** 15)):
        gamma = g2[:d, :d]
        noise = rng.standard_normal((d, n)) * 0.01
        yield f"euler d={d} n={n}", lambda b, gamma=gamma, noise=noise, d=d: kernels.euler_path(
            gamma, np.zeros(d), noise, 0.01, backend=b)

    model = ModelSpec([[2.0, 0.0], [0.0, 1.0]], 1.0, 0.4)
    for n in (256, 1024):
        grid = SampleGrid(10.0, n)
        lifts = [strat_lift(euler_simulate(model, grid, sample_fbm(0.4, grid, 2, s))) for s in (1, 2)]
        xa, xb = (lift.offsets() for lift in lifts)
        ra, rb = (lift.running for lift in lifts)
        yield f"pvar level1 n={n}", lambda b, xa=xa, xb=xb: kernels.pvar_level1(xa, xb, 2.6, backend=b)
        yield f"pvar level2 n={n}", lambda b, xa=xa, ra=ra, xb=xb, rb=rb: kernels.pvar_level2(
            xa, ra, xb, rb, 1.3, backend=b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        kernels.get_backend("cython")
        backends = ["cython", "python"]
    except ImportError:
        print("compiled extension not built; timing the Python backend only")
        backends = ["python"]
    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, fn in cases():
        times = []
        results = []
        for b in backends:
            results.append(fn(b))
            times.append(min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)))
        row = f"{name:<24}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(backends) == 2:
            same = np.array_equal(results[0], results[1]) if name.startswith("euler") else \
                np.isclose(results[0], results[1], rtol=1e-12)
            row += f"  {times[1] / times[0]:8.1f}x  {'match' if same else 'MISMATCH'}"
        print(row)


if __name__ == "__main__":
    main()
