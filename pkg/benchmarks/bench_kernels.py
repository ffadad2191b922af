"""Compare the compiled and NumPy RK4 kernels on representative workloads.

Usage: python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from radial_blowup import kernels
from radial_blowup.physical import PhysicalConfig, build_initial_data
from radial_blowup.solitons import SolitonParams, kappa_star
from radial_blowup.spectral import build_grid


def selfsim_case(n: int, nsteps: int):
    g = build_grid(n, 3.0)
    st = kappa_star(SolitonParams(0.3, 0.0), g)
    w1, w2 = st.first.values.copy(), st.second.values.copy()
    L, D, y = g.lmat, g.diff, g.nodes

    def run(mod):
        a, b = w1.copy(), w2.copy()
        mod.selfsim_advance(a, b, L, D, y, 3.0, 3, 1.0, 3.0, 1e-4, nsteps)
        return a

    return run


def wave_case(dr: float, nsteps: int):
    cfg = PhysicalConfig(p=3.0, N=3, r0=2.0, T0=1.0, eps0=0.25, dr=dr)
    u0, u1 = build_initial_data(cfg)
    inv_r = 1.0 / cfg.r_grid
    frozen = np.zeros(len(u0), dtype=np.uint8)
    dt = 0.9 * dr

    def run(mod):
        u, v = u0.copy(), u1.copy()
        for _ in range(nsteps):
            mod.wave_rk4_step(u, v, inv_r, dr, dt, 3, 3.0, frozen)
        return u

    return run


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled kernels are not built; only the NumPy backend is available")
    cases = [
        ("selfsim n=48, 2000 steps", selfsim_case(48, 2000)),
        ("selfsim n=96, 500 steps", selfsim_case(96, 500)),
        ("wave dr=1e-3, 200 steps", wave_case(1e-3, 200)),
    ]
    print(f"{'case':<28}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max diff':>12}")
    for name, run in cases:
        tp = min(timeit.repeat(lambda: run(kernels.python_backend), number=1, repeat=args.repeat))
        ref = run(kernels.python_backend)
        if kernels.compiled_backend is None:
            print(f"{name:<28}{tp:>12.4f}{'-':>14}{'-':>10}{'-':>12}")
            continue
        tc = min(timeit.repeat(lambda: run(kernels.compiled_backend), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(run(kernels.compiled_backend) - ref)) / max(1.0, np.max(np.abs(ref))))
        print(f"{name:<28}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
