"""Time the compiled and pure-Python kernel backends on L-shape meshes.

Usage::

    python benchmarks/bench_kernels.py --sizes 288 576 1152 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bemlocal import backend
from bemlocal.geometry import canonical_geometry, initial_mesh, refine_uniform
from bemlocal.operators import assemble_rhs_hypsing, assemble_rhs_symm, assemble_V
from bemlocal.solutions import solution_for


def _mesh(n: int):
    p = canonical_geometry("lshape")
    m = initial_mesh(p, elements_per_edge=6)
    while m.n_elements < n:
        m = refine_uniform(m)
    return m


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[288, 576, 1152])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    names = backend.available()
    backend.set_threads(args.threads)
    print(f"backends: {', '.join(names)}; threads={args.threads}; best of {args.repeat}")
    print(f"{'N':>6} {'kernel':<14}" + "".join(f"{n:>12}" for n in names) + (f"{'speedup':>10}" if len(names) > 1 else ""))
    for n in args.sizes:
        m = _mesh(n)
        sol = solution_for(m.polygon, 1 / 3)
        w = np.random.default_rng(0).normal(size=4 * m.n_elements)
        fine = refine_uniform(refine_uniform(m))
        jobs = {
            "V": lambda: assemble_V(m),
            "rhs symm": lambda: assemble_rhs_symm(m, sol),
            "rhs hypsing": lambda: assemble_rhs_hypsing(m, sol),
            "quadform x4": lambda: backend.slp_quadform(fine.starts, fine.ends, w),
        }
        for label, fn in jobs.items():
            times = {}
            for name in names:
                backend.use(name)
                times[name] = _best(fn, args.repeat)
            row = f"{m.n_elements:>6} {label:<14}" + "".join(f"{times[k]:>11.3f}s" for k in names)
            if len(names) > 1:
                row += f"{times['python'] / times[names[0]]:>9.1f}x"
            print(row, flush=True)
    backend.use(names[0])


if __name__ == "__main__":
    main()
