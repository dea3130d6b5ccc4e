"""Time the numba kernels against their numpy fallbacks on the bar fixture.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from shellopt import _kernels, fixtures
from shellopt.fea import ElasticityModel, MaterialModel
from shellopt.heat import HeatSolver
from shellopt.stress import DEFAULT_RADIUS_EDGES


def best_time(fn, repeat):
    fn()  # warm-up, includes JIT compilation on the numba path
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(mesh):
    g = mesh.graph
    radius = DEFAULT_RADIUS_EDGES * mesh.mean_edge_length
    temps = HeatSolver(mesh)(np.random.default_rng(0).uniform(1, 3, len(mesh.boundary))).values[mesh.tets]
    model = ElasticityModel(mesh, MaterialModel(1.0, 0.3))
    vals = model.k_solid.ravel()
    return {
        "bounded_dijkstra (all boundary sources)":
            lambda: _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, mesh.boundary, radius),
        "clip_fractions": lambda: _kernels.clip_fractions(temps, 1.0),
        "scatter_add (stiffness assembly)": lambda: _kernels.scatter_add(model._scatter, vals, len(model._row)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    mesh = fixtures.bar()
    print(f"bar fixture: {mesh.n_vertices} vertices, {mesh.n_tets} tets, {len(mesh.boundary)} boundary")
    print(f"{'kernel':42s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speed-up':>9s}")
    saved = _kernels.USE_NUMBA
    try:
        for name, fn in cases(mesh).items():
            timings = {}
            for flag in (True, False):
                _kernels.USE_NUMBA = flag
                timings[flag] = best_time(fn, args.repeat)
            print(f"{name:42s} {timings[True]:10.4f} {timings[False]:10.4f} {timings[False] / timings[True]:8.1f}x")
    finally:
        _kernels.USE_NUMBA = saved


if __name__ == "__main__":
    main()
