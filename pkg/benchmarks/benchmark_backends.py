"""Compare the compiled kernel against the numpy fallback.

Runs the same workloads through both backends, checks the trajectories
agree bitwise, and reports wall time per run.

    python benchmarks/benchmark_backends.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from bearing_flows.controllers import ControllerKind
from bearing_flows.engine import _core_py
from bearing_flows.geometry import BearingTarget, Formation
from bearing_flows.graphs import DirectedGraph
from bearing_flows.sim import SimConfig, _kernel_args

try:
    from bearing_flows.engine import _core_cy
except ImportError:
    _core_cy = None


def ring_graph(n, symmetric):
    edges = [(i, i % n + 1) for i in range(1, n + 1)]
    g = DirectedGraph(n, tuple(edges))
    return g.symmetrized() if symmetric else g


def workloads():
    rng = np.random.default_rng(0)
    out = []

    g = ring_graph(8, symmetric=True)
    f = Formation.from_positions(g, rng.uniform(-2, 2, size=(8, 2)))
    out.append(("consensus ring n=8, 20k steps", f,
                ControllerKind.CONSENSUS_UNDIRECTED, None,
                SimConfig(dt=5e-4, t_max=10.0, stop_tol=0.0)))

    g = ring_graph(12, symmetric=False)
    f = Formation.from_positions(g, rng.uniform(-2, 2, size=(12, 2)))
    out.append(("pursuit ring n=12, 20k steps", f,
                ControllerKind.CONSENSUS_DIRECTED, None,
                SimConfig(dt=5e-4, t_max=10.0, stop_tol=0.0)))

    g = ring_graph(6, symmetric=True)
    goal = Formation.from_positions(
        g, [[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 6, endpoint=False)])
    target = BearingTarget.from_formation(goal)
    f = Formation.from_positions(g, goal.positions + rng.normal(scale=0.3, size=(6, 2)))
    out.append(("formation hexagon n=6, 50k steps", f,
                ControllerKind.FORMATION_UNDIRECTED, target,
                SimConfig(dt=2e-4, t_max=10.0, stop_tol=0.0, record_every=100)))
    return out


def timed(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(**args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ns = ap.parse_args()

    if _core_cy is None:
        print("extension not built; nothing to compare")
        return

    print(f"{'workload':<36} {'python':>10} {'cython':>10} {'speedup':>8}")
    for name, f, kind, target, cfg in workloads():
        args = _kernel_args(f, kind, target, cfg)
        out_py, t_py = timed(_core_py.run, args, ns.repeat)
        out_cy, t_cy = timed(_core_cy.run, args, ns.repeat)
        if not np.array_equal(out_py["states"], out_cy["states"]):
            raise AssertionError(f"backend mismatch on {name!r}")
        print(f"{name:<36} {t_py:>9.3f}s {t_cy:>9.3f}s {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
