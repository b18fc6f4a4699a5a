"""Compiled versus numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--steps 10000]

Times the plaquette-phase sum on a 256 x 256 grid and the chain propagator
for the 20-site weak-link pump, once per available backend.
"""
import argparse
import timeit

import numpy as np

from nhrm import _kernels
from nhrm.bloch import ModelParams
from nhrm.dynamics import RampSchedule, evolve
from nhrm.geometry import CircleLoop, _grid_spinors
from nhrm.lattice import build_hamiltonian, edge_modes


def bench_plaquette(backend, repeat):
    right, left = _grid_spinors(CircleLoop((0.0, 0.0), 0.5), 1.5, -1, 256, 256)
    right, left = np.ascontiguousarray(right), np.ascontiguousarray(left)
    k = _kernels.get(backend)
    return min(timeit.repeat(lambda: k.plaquette_sum(right, left), number=1, repeat=repeat))


def bench_evolve(backend, repeat, steps):
    p = ModelParams(1.5, 0.5, 1.0, N=10)
    m = build_hamiltonian(p, "weak_link", 0.05)
    u = edge_modes(p)[0].amplitude.astype(complex)
    sched = RampSchedule(1.0, 1e-3, steps)
    return min(timeit.repeat(lambda: evolve(m, sched, u, u, stride=steps, backend=backend),
                             number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args(argv)
    rows = []
    for name, fn in (("plaquette 256x256", lambda b: bench_plaquette(b, args.repeat)),
                     (f"evolve {args.steps} steps", lambda b: bench_evolve(b, args.repeat, args.steps))):
        times = {b: fn(b) for b in _kernels.AVAILABLE}
        rows.append((name, times))
    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in _kernels.AVAILABLE) + "     speedup")
    for name, times in rows:
        line = f"{name:<24}" + "".join(f"{times[b]:>11.4f}s" for b in _kernels.AVAILABLE)
        if "cython" in times:
            line += f"  {times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
