"""Time the stencil kernels and one energy/gradient evaluation on both backends.

Usage: python benchmarks/bench_kernels.py [--cells 256] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from orliczlab import _kernels


def bench(name, fn, repeat):
    fn()  # warm-up (triggers numba compilation)
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {name:<22s} {t * 1e3:9.3f} ms")


def run_backend(label, k, cells, repeat):
    rng = np.random.default_rng(0)
    h = 1.0 / cells
    u = rng.standard_normal((cells + 1, cells + 1))
    c = rng.standard_normal((cells, cells))
    print(f"{label} backend, {cells}x{cells} cells")
    bench("tri_gradients", lambda: k.tri_gradients(u, h, h), repeat)
    bench("tri_scatter", lambda: k.tri_scatter(c, c, c, c, h, h), repeat)
    bench("cell_average_2d", lambda: k.cell_average_2d(u), repeat)
    bench("cell_scatter_2d", lambda: k.cell_scatter_2d(c), repeat)

    from orliczlab.mountain_pass import DiscreteFunctional, desk_spec

    J = DiscreteFunctional(desk_spec(cells=cells), kernels=k)
    x = rng.standard_normal(J.n_free)
    bench("energy", lambda: J.energy(x), repeat)
    bench("gradient", lambda: J.gradient(x), repeat)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    run_backend("numpy", _kernels.numpy_kernels, args.cells, args.repeat)
    if _kernels.numba_kernels is not None:
        run_backend("numba", _kernels.numba_kernels, args.cells, args.repeat)


if __name__ == "__main__":
    main()
