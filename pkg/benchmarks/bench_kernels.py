"""Time the numba and numpy element kernels on a sector mesh.

    python3 benchmarks/bench_kernels.py [--h 0.05] [--repeat 5]

Reports the best of ``repeat`` timings per kernel and backend, after one
warm-up call (which also triggers numba compilation), and checks that both
backends agree.
"""

import argparse
import math
import time

import numpy as np

from sectorpde import _kernels
from sectorpde.geometry import SectorSpec, mesh_sector


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--R", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=20000)
    args = ap.parse_args()

    mesh = mesh_sector(SectorSpec(0.75 * math.pi, args.R, args.h))
    nodes = np.ascontiguousarray(mesh.nodes)
    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int64)
    vals = np.sin(nodes[:, 0]) * np.cos(nodes[:, 1])
    rng = np.random.default_rng(0)
    r = args.R * np.sqrt(rng.uniform(0, 1, args.points))
    th = rng.uniform(-0.7, 0.7, args.points) * math.pi
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    loc = _kernels.Locator(nodes, tris)

    backends = [_kernels.numpy_impl] + ([_kernels.numba_impl] if _kernels.HAVE_NUMBA else [])
    cases = {
        "local_stiffness": lambda b: b.local_stiffness(nodes, tris),
        "lumped_mass": lambda b: b.lumped_mass(nodes, tris, len(nodes)),
        "gradients": lambda b: b.gradients(nodes, tris, vals),
        "locate": lambda b: b.locate(nodes, tris, pts, loc),
    }
    print(f"mesh: {len(nodes)} nodes, {len(tris)} triangles; {args.points} locate queries")
    print(f"{'kernel':<16}" + "".join(f"{b.name:>12}" for b in backends) + f"{'speedup':>10}")
    for name, call in cases.items():
        t = [best_of(lambda b=b: call(b), args.repeat) for b in backends]
        out = [call(b) for b in backends]
        if len(out) == 2:
            a, c = out
            a = a if isinstance(a, tuple) else (a,)
            c = c if isinstance(c, tuple) else (c,)
            for x, y in zip(a, c):
                np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
        speed = f"{t[0] / t[-1]:9.1f}x" if len(t) == 2 else ""
        print(f"{name:<16}" + "".join(f"{x * 1e3:10.2f}ms" for x in t) + speed)


if __name__ == "__main__":
    main()
