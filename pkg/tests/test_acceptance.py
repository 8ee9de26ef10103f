"""Acceptance gate: one test per shipped guarantee, at the stated tolerance.

Each test prints a single PASS/FAIL line (visible with -rA or -s) and
asserts the same condition, so the suite doubles as a checklist.  Run
with `pytest tests/test_acceptance.py -v`.
"""

import time

import numpy as np
import pytest

from bearing_flows.analysis import (
    conjecture_bound,
    estimate_nu,
    fermat_equilibrium,
    fermat_residual,
    finite_time_bound,
    jacobian_spectrum,
    node_bearing_residual,
    persistence_check,
    PersistenceStatus,
)
from bearing_flows.controllers import ControllerKind, phi_tilde, psi, velocity
from bearing_flows.geometry import (
    BearingTarget,
    Formation,
    PairClass,
    classify_pair,
    is_bearing_rigid,
)
from bearing_flows.graphs import DirectedGraph, classify_connectivity
from bearing_flows.sim import SimConfig, StopReason, simulate


def _verdict(number, label, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    print(f"{tag}  criterion {number:2d}: {label}{suffix}")
    assert ok, f"criterion {number}: {label}{suffix}"


# ------------------------------------------------------------ shared shapes

def chorded_square_graph():
    return DirectedGraph(4, ((1, 2), (2, 4), (4, 3), (3, 1), (1, 4)))


def counterexample_formation():
    return Formation.from_positions(
        chorded_square_graph(),
        [[0.0, 0.0], [2.0, 0.0], [3.0, -4.0], [2.0, -2.0]])


def undirected(n, pairs):
    return DirectedGraph(n, tuple(pairs)).symmetrized()


def random_connected_undirected(rng, n):
    # random spanning tree, then a few extra chords
    pairs = [(int(rng.integers(1, i)), i) for i in range(2, n + 1)]
    for _ in range(int(rng.integers(0, n))):
        i, j = rng.choice(n, size=2, replace=False) + 1
        if i != j:
            pairs.append((int(min(i, j)), int(max(i, j))))
    return undirected(n, set(pairs))


def spread_positions(rng, n, d=2, min_dist=0.2, scale=1.0):
    while True:
        pos = rng.normal(0.0, scale, (n, d))
        dists = [np.linalg.norm(pos[b] - pos[a])
                 for a in range(n) for b in range(a + 1, n)]
        if min(dists) > min_dist:
            return pos


def feasible_target(rng, graph, d=2):
    shape = spread_positions(rng, graph.n, d, min_dist=0.4)
    return BearingTarget.from_formation(Formation.from_positions(graph, shape))


# ----------------------------------------------------------------- criteria

def test_criterion_01_counterexample_spectra():
    started = time.perf_counter()
    spec = jacobian_spectrum(counterexample_formation())
    elapsed = time.perf_counter() - started
    ok = (spec.max_real_jacobian > 1e-8
          and spec.max_real_minus_laplacian > 1e-8
          and elapsed < 1.0)
    _verdict(1, "directed-flow Jacobian and -L_B unstable at the target",
             ok, f"max Re = {spec.max_real_jacobian:.3e}, "
                 f"{spec.max_real_minus_laplacian:.3e}, {elapsed * 1e3:.0f} ms")


def test_criterion_02_two_body_bound_is_tight():
    g = undirected(2, [(1, 2)])
    f0 = Formation.from_positions(g, [[0.0, 0.0], [2.0, 0.0]])
    nu = estimate_nu(g, 2, restarts=16, seed=0)
    bound = finite_time_bound(f0, nu)
    traj = simulate(f0, ControllerKind.CONSENSUS_UNDIRECTED,
                    SimConfig(dt=1e-4, t_max=2.0))
    ok = (traj.stop_reason is StopReason.CONVERGED
          and abs(traj.t_converge - 1.0) <= 0.01
          and abs(nu.value - np.sqrt(2.0)) <= 1e-9
          and abs(bound - 1.0) <= 1e-9
          and abs(traj.t_converge - bound) <= 0.01 * bound)
    _verdict(2, "two-body reach time equals the finite-time bound within 1%",
             ok, f"t = {traj.t_converge:.4f}, bound = {bound:.6f}")


def test_criterion_03_finite_time_bound_sound_on_random_graphs():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_margin = np.inf
    violations = 0
    for trial in range(100):
        n = int(rng.integers(3, 7))
        g = random_connected_undirected(rng, n)
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        nu = estimate_nu(g, 2, restarts=64, seed=trial)
        bound = finite_time_bound(f0, nu)
        traj = simulate(f0, ControllerKind.CONSENSUS_UNDIRECTED,
                        SimConfig(dt=1e-3, t_max=bound + 0.5))
        if traj.stop_reason is not StopReason.CONVERGED \
                or traj.t_converge > bound:
            violations += 1
        else:
            worst_margin = min(worst_margin, bound - traj.t_converge)
    elapsed = time.perf_counter() - started
    ok = violations == 0 and elapsed < 120.0
    _verdict(3, "phi/nu^2 dominates reach time on 100 random formations",
             ok, f"violations = {violations}, closest margin = "
                 f"{worst_margin:.4f}, {elapsed:.1f} s")


def test_criterion_04_centroid_invariance_on_undirected_runs():
    rng = np.random.default_rng(7)
    worst = 0.0
    runs = []
    for _ in range(10):
        n = int(rng.integers(3, 7))
        g = random_connected_undirected(rng, n)
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        runs.append((f0, ControllerKind.CONSENSUS_UNDIRECTED, None))
        runs.append((f0, ControllerKind.FORMATION_UNDIRECTED,
                     feasible_target(rng, g)))
    for f0, kind, target in runs:
        traj = simulate(f0, kind, SimConfig(dt=1e-3, t_max=3.0),
                        target=target)
        drift = np.linalg.norm(traj.centroid - traj.centroid[0], axis=1)
        worst = max(worst, float(drift.max()))
    ok = worst < 1e-6
    _verdict(4, "centroid drift below 1e-6 on every undirected run",
             ok, f"worst drift = {worst:.3e} over {len(runs)} runs")


def _monotone_after_slack(series, slack):
    return float(np.diff(series).max(initial=-np.inf)) <= slack


def test_criterion_05_lyapunov_monotonicity_suite():
    dt = 1e-3
    cfg = SimConfig(dt=dt, t_max=2.0)
    rng = np.random.default_rng(55)
    worst = {"phi": -np.inf, "V": -np.inf, "psi_u": -np.inf, "psi_c": -np.inf}

    for _ in range(50):
        n = int(rng.integers(3, 7))
        g = random_connected_undirected(rng, n)
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        traj = simulate(f0, ControllerKind.CONSENSUS_UNDIRECTED, cfg)
        worst["phi"] = max(worst["phi"], float(np.diff(traj.phi_tilde).max()))

    for _ in range(50):
        n = int(rng.integers(3, 7))
        while True:
            mask = rng.random((n, n)) < 0.35
            edges = tuple((i + 1, j + 1) for i in range(n) for j in range(n)
                          if i != j and mask[i, j])
            if not edges:
                continue
            g = DirectedGraph(n, edges)
            if classify_connectivity(g).has_globally_reachable_node:
                break
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        traj = simulate(f0, ControllerKind.CONSENSUS_DIRECTED, cfg)
        worst["V"] = max(worst["V"], float(np.diff(traj.v_max_dist).max()))

    for _ in range(50):
        n = int(rng.integers(3, 7))
        g = random_connected_undirected(rng, n)
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        traj = simulate(f0, ControllerKind.FORMATION_UNDIRECTED, cfg,
                        target=feasible_target(rng, g))
        worst["psi_u"] = max(worst["psi_u"], float(np.diff(traj.psi).max()))

    for _ in range(50):
        n = int(rng.integers(3, 7))
        g = DirectedGraph(n, tuple((i, i % n + 1) for i in range(1, n + 1)))
        f0 = Formation.from_positions(g, spread_positions(rng, n))
        traj = simulate(f0, ControllerKind.FORMATION_DIRECTED, cfg,
                        target=feasible_target(rng, g))
        worst["psi_c"] = max(worst["psi_c"], float(np.diff(traj.psi).max()))

    slack = 2.0 * dt
    ok = all(v <= slack for v in worst.values())
    _verdict(5, "phi/V/psi non-increasing up to 2*dt on 50 seeds per family",
             ok, "largest increases: " + ", ".join(
                 f"{k} = {v:.2e}" for k, v in worst.items()))


def test_criterion_06_directed_consensus_reaches_the_leader():
    rng = np.random.default_rng(66)
    worst = 0.0
    tol = 1e-6
    for _ in range(20):
        n = int(rng.integers(3, 8))
        # node 1 is the leader: no outgoing arrows, everyone reaches it
        pairs = [(i, int(rng.integers(1, i))) for i in range(2, n + 1)]
        for _ in range(int(rng.integers(0, n))):
            i = int(rng.integers(2, n + 1))
            j = int(rng.integers(1, n + 1))
            if i != j:
                pairs.append((i, j))
        g = DirectedGraph(n, tuple(set(pairs)))
        pos = spread_positions(rng, n)
        f0 = Formation.from_positions(g, pos)
        traj = simulate(f0, ControllerKind.CONSENSUS_DIRECTED,
                        SimConfig(dt=1e-3, t_max=30.0, stop_tol=tol))
        assert traj.stop_reason is StopReason.CONVERGED
        gap = np.linalg.norm(traj.positions(-1) - pos[0], axis=1).max()
        worst = max(worst, float(gap))
    ok = worst <= tol
    _verdict(6, "all agents stop within tolerance of the leader's start",
             ok, f"worst leader gap = {worst:.3e} over 20 seeds")


def test_criterion_07_cycle_length_bound_on_the_unit_square():
    g = DirectedGraph(4, ((1, 2), (2, 3), (3, 4), (4, 1)))
    f0 = Formation.from_positions(
        g, [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    report = conjecture_bound(f0)
    traj = simulate(f0, ControllerKind.CONSENSUS_DIRECTED,
                    SimConfig(dt=1e-3, t_max=2.0))
    ok = (abs(report.bound - 1.0) <= 1e-12
          and abs(report.caption_variant - 2.0) <= 1e-12
          and traj.stop_reason is StopReason.CONVERGED
          and traj.t_converge <= report.bound * 1.02)
    _verdict(7, "unit-square pursuit meets the cycle-length bound within 2%",
             ok, f"t = {traj.t_converge:.4f}, bound = {report.bound:.6f}, "
                 f"length/4 variant = {report.caption_variant:.6f}")


def test_criterion_08_rigidity_rank_classification():
    rigid = is_bearing_rigid(Formation.from_positions(
        chorded_square_graph(),
        [[0.0, 2.0], [2.0, 2.0], [0.0, 0.0], [2.0, 0.0]]))
    floppy = is_bearing_rigid(Formation.from_positions(
        DirectedGraph(4, ((1, 2), (2, 4), (4, 3), (3, 1))),
        [[0.0, 2.0], [3.0, 2.0], [0.0, 0.0], [3.0, 0.0]]))
    ok = (rigid.rigid and rigid.rank == 5 and rigid.required_rank == 5
          and not floppy.rigid and floppy.rank == 4)
    _verdict(8, "chorded square rigid at rank 5, plain cycle not rigid",
             ok, f"ranks {rigid.rank} and {floppy.rank}, need 5")


def test_criterion_09_persistence_witness_on_the_skewed_pair():
    g = DirectedGraph(4, ((1, 2), (1, 3), (3, 4), (2, 4), (1, 4)))
    target_f = Formation.from_positions(
        g, [[0.0, 2.0], [2.0, 2.0], [0.0, 0.0], [2.0, 0.0]])
    witness_f = Formation.from_positions(
        g, [[0.1632, 2.25], [3.0, 2.0], [0.0, 0.0], [3.0, 0.0]])
    residual = node_bearing_residual(
        witness_f, BearingTarget.from_formation(target_f))
    pair = classify_pair(witness_f, target_f)
    report = persistence_check(g, 2, trials=20, seed=0)
    ok = (residual < 1e-2
          and pair is not PairClass.EQUIVALENT
          and report.status is PersistenceStatus.NON_PERSISTENT_WITNESS
          and report.residual < 1e-8)
    _verdict(9, "skewed pair certifies the graph non-persistent",
             ok, f"pair residual = {residual:.2e}, search found witness "
                 f"with residual {report.residual:.1e}")


def test_criterion_10_controllers_match_potential_gradients():
    rng = np.random.default_rng(10)
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 7))
        g = random_connected_undirected(rng, n)
        f = Formation.from_positions(g, spread_positions(rng, n))
        target = feasible_target(rng, g)

        for kind, value in ((ControllerKind.CONSENSUS_UNDIRECTED,
                             lambda ff: phi_tilde(ff)),
                            (ControllerKind.FORMATION_UNDIRECTED,
                             lambda ff: psi(ff, target))):
            v = velocity(kind, f, None if kind.is_formation is False else target)
            grad = np.zeros_like(f.x)
            for a in range(f.x.shape[0]):
                xp = f.x.copy()
                xm = f.x.copy()
                xp[a] += h
                xm[a] -= h
                grad[a] = (value(Formation(g, f.d, xp))
                           - value(Formation(g, f.d, xm))) / (2.0 * h)
            worst = max(worst, float(np.abs(v.ravel() + grad).max()))
    ok = worst < 1e-5
    _verdict(10, "undirected flows descend their potentials (FD check)",
             ok, f"max |v + grad| = {worst:.3e} over 200 formations")


def _fermat_grid_oracle(foci, v_star):
    """Two-stage dense minimization of sum of distances plus the linear pull."""
    lo = foci.min(axis=0) - 2.0
    hi = foci.max(axis=0) + 2.0

    def best_on(gx, gy):
        xx, yy = np.meshgrid(gx, gy, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        dists = np.linalg.norm(pts[:, None, :] - foci[None, :, :], axis=2)
        vals = dists.sum(axis=1) + pts @ v_star
        return pts[int(np.argmin(vals))]

    coarse = best_on(np.linspace(lo[0], hi[0], 201),
                     np.linspace(lo[1], hi[1], 201))
    step = max(hi[0] - lo[0], hi[1] - lo[1]) / 200.0
    fine = best_on(np.linspace(coarse[0] - step, coarse[0] + step, 1201),
                   np.linspace(coarse[1] - step, coarse[1] + step, 1201))
    return fine


def _interior_instance(foci, v_star):
    # the stationarity equation is solvable only when no focus absorbs the
    # pull of the others: at each focus the leftover subgradient must exceed 1
    for j in range(foci.shape[0]):
        others = np.delete(foci, j, axis=0)
        if fermat_residual(foci[j], others, v_star) <= 1.05:
            return False
    return True


def test_criterion_11_fermat_solver_against_grid_oracle():
    rng = np.random.default_rng(111)
    worst_res = 0.0
    worst_gap = 0.0
    done = 0
    while done < 50:
        k = int(rng.integers(3, 6))
        foci = rng.uniform(-1.0, 1.0, (k, 2))
        mag = rng.uniform(0.0, 0.8 * k)
        ang = rng.uniform(0.0, 2.0 * np.pi)
        v_star = mag * np.array([np.cos(ang), np.sin(ang)])
        # a residual below 1e-8 presumes an interior minimizer; draws whose
        # optimum sits on a focus are re-rolled (kink cases have their own
        # subdifferential tests in test_analysis)
        if not _interior_instance(foci, v_star):
            continue
        sol = fermat_equilibrium(foci, v_star)
        oracle = _fermat_grid_oracle(foci, v_star)
        worst_res = max(worst_res, sol.residual)
        worst_gap = max(worst_gap, float(np.linalg.norm(sol.point - oracle)))
        done += 1
    ok = worst_res < 1e-8 and worst_gap < 1e-4
    _verdict(11, "equilibrium solver matches the dense grid oracle",
             ok, f"worst residual = {worst_res:.2e}, worst gap = "
                 f"{worst_gap:.2e} over 50 instances")
