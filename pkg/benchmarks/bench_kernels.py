"""Time the hot kernels under the compiled and the pure-Python backend.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]``

Each case runs a public library operation end to end, so the numbers
include the Python-side setup that both backends share.
"""

from __future__ import annotations

import argparse
import json
import math
import timeit

import numpy as np

from mfiq import _backend
from mfiq.dynamics import PropagationRun, gaussian_packet, propagate
from mfiq.fields import Grid, PhysicalConstants, free_potential, harmonic_potential
from mfiq.klein_gordon import kg_propagate, plane_wave_run
from mfiq.mfi import MfiProblem, initial_guess


def mfi_case():
    problem = MfiProblem(harmonic_potential(Grid(1024, -10.0, 10.0)))
    h = problem.hamiltonian()
    tau = 0.8 / h.spectral_bound()
    v = np.ascontiguousarray(h.v_unknowns)
    w = h.stencil_weights
    u0 = initial_guess(problem)

    def run():
        _backend.kernels.mfi_descent(u0.copy(), v, w, tau, 20_000, False)

    return "mfi_descent n=1024 x 20000 steps", run


def cn_case():
    grid = Grid(2048, -11.3, 11.3)
    run = PropagationRun(gaussian_packet(grid, 1.0), free_potential(grid), PhysicalConstants(),
                         1e-3, 2000, 10)
    return "crank_nicolson n=2048 x 2000 steps", lambda: propagate(run)


def kg_case():
    grid = Grid(1024, 0.0, 2 * math.pi, "periodic")
    run = plane_wave_run(grid, 1.0, t_final=4.0)
    return "kg_leapfrog n=1024 x 1300 steps", lambda: kg_propagate(run)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", help="also write the timings here")
    args = parser.parse_args(argv)
    try:
        _backend.use_backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rows = []
    for make in (mfi_case, cn_case, kg_case):
        name, fn = make()
        best = {}
        for backend in ("cython", "python"):
            _backend.use_backend(backend)
            fn()  # warm-up
            best[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        rows.append({"case": name, **best, "speedup": best["python"] / best["cython"]})
    _backend.use_backend("cython")
    print(f"{'case':40s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['case']:40s} {r['cython']:10.4f} {r['python']:10.4f} {r['speedup']:7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
