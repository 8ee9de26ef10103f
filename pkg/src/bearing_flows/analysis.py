"""Certificates for bearing flows.

Four families of results, all desk-scale dense computations:

* the disagreement gap `nu` (infimum of the consensus gradient norm on the
  unit disagreement sphere) estimated by multi-start projected gradient
  descent, and the finite-time reach bound phi_tilde(x0)/nu^2 built from it;
* a closed-form bound on pursuit convergence time from the longest directed
  Hamiltonian cycle of the interaction graph;
* spectra of the directed formation Jacobian and of the negated bearing
  Laplacian at a target formation;
* generalized Fermat-point equilibria of a single agent's private
  potential, and a randomized falsification search for bearing persistence
  of a directed graph.

Every randomized routine takes an explicit seed and is deterministic given
(inputs, seed).
"""
import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bearing_flows.controllers import phi_tilde
from bearing_flows.geometry import (
    BearingTarget,
    DegenerateFormation,
    Formation,
    PairClass,
    bearing_laplacian,
    classify_pair,
    directed_jacobian,
    is_bearing_rigid,
)
from bearing_flows.graphs import DirectedGraph, classify_connectivity, cascade_degrees


class DisconnectedGraph(ValueError):
    pass


class NonPositiveNu(ValueError):
    pass


class NoHamiltonianCycle(ValueError):
    pass


class TooLarge(ValueError):
    pass


class Infeasible(ValueError):
    pass


class CollinearDegenerate(ValueError):
    """Collinear foci whose minimizer is a segment, not a point.

    Carries the segment endpoint closest to the foci centroid in `point`.
    """

    def __init__(self, message, point):
        super().__init__(message)
        self.point = np.asarray(point, dtype=float)


@dataclass(frozen=True, eq=False)
class DisagreementProjector:
    """Projector onto the subspace orthogonal to uniform translations."""
    n: int
    d: int

    def matrix(self):
        n, d = self.n, self.d
        return np.kron(np.eye(n) - np.ones((n, n)) / n, np.eye(d))

    def apply(self, x):
        x = np.asarray(x, dtype=float).reshape(self.n, self.d)
        return (x - x.mean(axis=0)).reshape(-1)


# ---------------------------------------------------------------------------
# nu estimation

def _connected_partitions(adj, n, cap):
    """Partitions of {0..n-1} into groups each connected under adj.

    Deterministic order; stops after cap partitions.  Groups are sorted
    tuples and each partition lists groups by their smallest member.
    """
    out = []

    def connected(members):
        members = set(members)
        seen = {next(iter(members))}
        queue = list(seen)
        while queue:
            v = queue.pop()
            for w in adj[v]:
                if w in members and w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen == members

    def subsets_containing(vmin, rest):
        rest = sorted(rest)
        for bits in range(1 << len(rest)):
            subset = [vmin] + [rest[i] for i in range(len(rest)) if bits >> i & 1]
            if connected(subset):
                yield tuple(subset)

    def rec(remaining, acc):
        if len(out) >= cap:
            return
        if not remaining:
            out.append(tuple(acc))
            return
        vmin = min(remaining)
        for group in subsets_containing(vmin, remaining - {vmin}):
            rec(remaining - set(group), acc + [group])
            if len(out) >= cap:
                return

    rec(set(range(n)), [])
    return out


@dataclass(frozen=True, eq=False)
class NuEstimate:
    """Best value found for the decay-rate floor, with search metadata.

    value is an upper bound on the true floor (the problem is nonconvex);
    it is the norm of the effective consensus velocity, which equals the
    plain gradient norm away from coincidences but averages each pinned
    cluster's pulls on coincidence patterns.  minimizer is the full flat
    configuration achieving it, stratum the coincidence pattern it lies on
    (a partition of the vertex set, 1-based; all-singletons means no
    coincidences).
    """
    value: float
    restarts: int
    minimizer: np.ndarray
    stratum: tuple
    strata_searched: int
    strata_truncated: bool

    def __float__(self):
        return float(self.value)


def _stratum_descent(rng, groups, group_of, edges, w, n, d, restarts, max_iter=150):
    """Multi-start PGD for one coincidence pattern.

    Variables are one point per group; the constraint is the image of the
    unit disagreement sphere, sum_C |C| ||y_C - ybar||^2 = 1 with
    ybar = (1/n) sum_C |C| y_C.  The objective is the squared norm of the
    effective velocity: pinned clusters move at the average of their
    members' pulls, so each group contributes ||sum of its bearing
    pulls||^2 / |C|.  Minimizing the per-node sum instead would overstate
    the decay floor wherever members of a cluster pull unequally.
    Returns (best squared value, best Y).
    """
    G = len(groups)
    inter = [(group_of[i], group_of[j], i, j) for i, j in edges
             if group_of[i] != group_of[j]]
    if not inter:
        return np.inf, None
    ga = np.array([t[0] for t in inter])
    gb = np.array([t[1] for t in inter])
    m = len(inter)
    # group-by-edge signs: z_C collects +u_e when the edge tail lies in C,
    # -u_e when the head does
    M = np.zeros((G, m))
    for e, (a, b, i, j) in enumerate(inter):
        M[a, e] += 1.0
        M[b, e] -= 1.0
    wcol = w[None, :, None]
    winv = (1.0 / w)[None, :, None]

    def retract(Y):
        ybar = (wcol * Y).sum(axis=1, keepdims=True) / n
        Yc = Y - ybar
        nrm = np.sqrt((wcol * Yc * Yc).sum(axis=(1, 2), keepdims=True))
        return Yc / nrm

    def value_and_units(Y):
        diff = Y[:, gb] - Y[:, ga]
        dd = np.sqrt((diff * diff).sum(axis=2))
        u = np.zeros_like(diff)
        np.divide(diff, dd[:, :, None], out=u, where=dd[:, :, None] > 1e-12)
        z = np.einsum("gm,rmd->rgd", M, u)
        return (winv * z * z).sum(axis=(1, 2)), u, z, dd

    Y = retract(rng.standard_normal((restarts, G, d)))
    f, u, z, dd = value_and_units(Y)
    step = np.full(restarts, 0.25)
    active = np.ones(restarts, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        # dF/du_e = 2 (z_A/|A| - z_B/|B|) for the edge's tail and head
        # groups; chain through u = diff/d with P applied as q - u (u.q)
        zq = np.einsum("gm,rgd->rmd", M, winv * z)
        inner = (u * zq).sum(axis=2, keepdims=True)
        pe = zq - u * inner
        safe = np.where(dd > 1e-12, dd, 1.0)
        ge = 2.0 * pe / safe[:, :, None]
        # +(P/d) dF/du on the head group, the negative on the tail group
        grad = np.einsum("gm,rmd->rgd", -M, ge)
        gsq = (grad * grad).sum(axis=(1, 2))

        improved = np.zeros(restarts, dtype=bool)
        for _bt in range(30):
            trying = active & ~improved
            if not trying.any():
                break
            cand = retract(Y - step[:, None, None] * grad)
            fc, _, _, _ = value_and_units(cand)
            ok = trying & (fc <= f - 1e-4 * step * gsq)
            Y[ok] = cand[ok]
            improved |= ok
            shrink = trying & ~ok
            step[shrink] *= 0.5
        step[improved] *= 1.5
        stalled = active & (~improved | (step * np.sqrt(gsq) < 1e-10))
        active &= ~stalled
        f_new, u, z, dd = value_and_units(Y)
        active &= f - f_new > 1e-14
        f = f_new
    best = int(np.argmin(f))
    return float(f[best]), Y[best]


def estimate_nu(graph, d, restarts=64, seed=0, strict=True, max_strata=5000):
    """Estimate the consensus decay-rate floor of a connected graph.

    Minimizes the effective velocity norm over configurations of unit
    disagreement.  Away from coincidences that is the plain gradient norm
    of the distance-sum potential, but the infimum can live where agents
    coincide, so the search runs once per coincidence pattern: every
    partition of the vertices into connected groups, with the grouped
    agents pinned together.  A pinned cluster slides at the average of
    its members' pulls, so each group contributes ||sum of pulls||^2/|C|
    to the objective; using the per-node sum there would overestimate the
    floor and the reach bound built on it would not be sound.  `restarts`
    controls the all-singletons pattern; coarser patterns get restarts/8
    (at least 8) since their search spaces are smaller.

    Returns a NuEstimate; its value is an upper bound on the true floor.
    With strict=False a disconnected graph yields value 0 (the floor of a
    disconnected graph) instead of raising DisconnectedGraph.
    """
    n = graph.n
    adj = {v: set() for v in range(n)}
    for i, j in graph.orientation:
        adj[i - 1].add(j - 1)
        adj[j - 1].add(i - 1)
    reach = {0}
    queue = [0]
    while queue:
        v = queue.pop()
        for w_ in adj[v]:
            if w_ not in reach:
                reach.add(w_)
                queue.append(w_)
    if len(reach) != n:
        if strict:
            raise DisconnectedGraph("graph is disconnected; the gap is 0")
        return NuEstimate(0.0, 0, np.zeros(n * d), (), 0, False)
    if n < 2:
        raise ValueError("need at least two agents")

    edges = [(i - 1, j - 1) for i, j in graph.orientation]
    partitions = _connected_partitions(adj, n, max_strata)
    truncated = len(partitions) >= max_strata

    best = (np.inf, None, None)
    total_restarts = 0
    for idx, part in enumerate(partitions):
        if len(part) < 2:
            continue  # all agents coincident cannot have unit disagreement
        group_of = {}
        for g, members in enumerate(part):
            for v in members:
                group_of[v] = g
        w = np.array([len(g) for g in part], dtype=float)
        r = restarts if len(part) == n else max(8, restarts // 8)
        rng = np.random.default_rng([seed, idx])
        val, Y = _stratum_descent(rng, part, group_of, edges, w, n, d, r)
        total_restarts += r
        if val < best[0]:
            best = (val, Y, part)

    val, Y, part = best
    x = np.zeros((n, d))
    for g, members in enumerate(part):
        for v in members:
            x[v] = Y[g]
    stratum = tuple(tuple(v + 1 for v in group) for group in part)
    return NuEstimate(
        value=math.sqrt(val), restarts=total_restarts,
        minimizer=x.reshape(-1), stratum=stratum,
        strata_searched=len(partitions), strata_truncated=truncated,
    )


def finite_time_bound(f0, nu):
    """Reach-time bound phi_tilde(x0)/nu^2 for undirected consensus."""
    nu = float(nu)
    if nu <= 0.0:
        raise NonPositiveNu("bound needs a positive gap estimate")
    return phi_tilde(f0) / nu ** 2


# ---------------------------------------------------------------------------
# pursuit-time conjecture bound

@dataclass(frozen=True)
class ConjectureBound:
    """Pursuit convergence-time bound from the longest directed
    Hamiltonian cycle of the interaction graph at the initial positions.

    bound = (l / 2n) sec^2(pi/n); caption_variant = (l / 4) sec^2(pi/n) is
    an alternative prefactor seen in reported examples and is emitted for
    comparison.  n = 2 puts sec(pi/2) at a pole: the bound fields are inf
    and degenerate is set.
    """
    n: int
    cycle_length: float
    cycle: tuple
    bound: float
    caption_variant: float
    degenerate: bool


def conjecture_bound(f0):
    graph = f0.graph
    n = graph.n
    if n > 10:
        raise TooLarge("exhaustive cycle search is capped at n = 10")
    pos = f0.positions
    has = set(graph.edges)

    best_len = -1.0
    best_cycle = None
    if n == 2:
        if (1, 2) in has and (2, 1) in has:
            dist = float(np.linalg.norm(pos[1] - pos[0]))
            best_len = 2.0 * dist
            best_cycle = (1, 2)
    else:
        for perm in itertools.permutations(range(2, n + 1)):
            cycle = (1,) + perm
            total = 0.0
            ok = True
            for a, b in zip(cycle, cycle[1:] + (1,)):
                if (a, b) not in has:
                    ok = False
                    break
                total += float(np.linalg.norm(pos[b - 1] - pos[a - 1]))
            if ok and total > best_len:
                best_len = total
                best_cycle = cycle
    if best_cycle is None:
        raise NoHamiltonianCycle("graph has no directed Hamiltonian cycle")

    if n == 2:
        return ConjectureBound(n, best_len, best_cycle, math.inf, math.inf, True)
    sec2 = 1.0 / math.cos(math.pi / n) ** 2
    return ConjectureBound(
        n=n, cycle_length=best_len, cycle=best_cycle,
        bound=best_len / (2.0 * n) * sec2,
        caption_variant=best_len / 4.0 * sec2,
        degenerate=False,
    )


# ---------------------------------------------------------------------------
# spectra

@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Eigenvalues of the directed formation Jacobian and of the negated
    bearing Laplacian at a target formation, sorted by descending real
    part then descending imaginary part."""
    jacobian_eigenvalues: tuple
    minus_laplacian_eigenvalues: tuple
    max_real_jacobian: float
    max_real_minus_laplacian: float

    @property
    def max_real_part(self):
        return max(self.max_real_jacobian, self.max_real_minus_laplacian)


def _sorted_eigs(mat):
    vals = np.linalg.eigvals(mat)
    order = np.lexsort((-vals.imag, -vals.real))
    return tuple(complex(v) for v in vals[order])


def jacobian_spectrum(target):
    """Spectra of J_dir and -L_B evaluated at the target formation."""
    pos = target.positions
    for i, j in target.graph.edges:
        if np.linalg.norm(pos[j - 1] - pos[i - 1]) <= target.eps_c:
            raise DegenerateFormation(f"coincident endpoints on edge ({i},{j})")
    jd = directed_jacobian(target)
    mlb = -bearing_laplacian(target, target)
    ev_j = _sorted_eigs(jd)
    ev_l = _sorted_eigs(mlb)
    return SpectrumReport(
        jacobian_eigenvalues=ev_j,
        minus_laplacian_eigenvalues=ev_l,
        max_real_jacobian=max(v.real for v in ev_j),
        max_real_minus_laplacian=max(v.real for v in ev_l),
    )


# ---------------------------------------------------------------------------
# generalized Fermat point

@dataclass(frozen=True, eq=False)
class FermatPoint:
    point: np.ndarray
    residual: float
    iterations: int
    method: str


def fermat_residual(y, foci, v_star):
    """Norm of sum_i unit(y -> p_i) - v_star, zero bearings at contact."""
    y = np.asarray(y, dtype=float)
    foci = np.asarray(foci, dtype=float)
    acc = -np.asarray(v_star, dtype=float)
    for p in foci:
        r = p - y
        dist = float(np.linalg.norm(r))
        if dist > 1e-12:
            acc = acc + r / dist
    return float(np.linalg.norm(acc))


def _collinear_frame(foci):
    """(base, direction) when foci lie on a line, else None."""
    center = foci.mean(axis=0)
    spread = foci - center
    _, svals, vt = np.linalg.svd(spread, full_matrices=False)
    if svals.shape[0] >= 2 and svals[1] > 1e-10 * max(svals[0], 1.0):
        return None
    if svals[0] <= 1e-14:
        return None  # all coincident; handled by the caller
    return center, vt[0]


def fermat_equilibrium(foci, v_star=None):
    """Point y where the bearings toward the foci sum to v_star.

    Minimizes the strictly convex-off-kinks objective
    sum_i ||p_i - y|| + v_star . y by damped Newton with a gradient
    fallback within 1e-8 of a focus.  Collinear foci are reduced to the
    1-d problem first: a flat stretch of minimizers raises
    CollinearDegenerate carrying the segment endpoint nearest the foci
    centroid, and a minimizer pinned at a focus is returned with the
    kink convention (zero bearing at contact) in its residual.
    """
    foci = np.atleast_2d(np.asarray(foci, dtype=float))
    k, d = foci.shape
    v_star = np.zeros(d) if v_star is None else np.asarray(v_star, dtype=float)
    if v_star.shape != (d,):
        raise ValueError("v_star dimension mismatch")
    if np.linalg.norm(v_star) >= k:
        raise Infeasible(f"need ||v_star|| < {k} (number of foci)")
    if k == 1:
        return FermatPoint(foci[0].copy(), fermat_residual(foci[0], foci, v_star),
                           0, "kink")
    if np.max(np.linalg.norm(foci - foci[0], axis=1)) <= 1e-12:
        raise ValueError("foci must not all coincide")

    frame = _collinear_frame(foci)
    if frame is not None:
        base, direction = frame
        v_par = float(v_star @ direction)
        v_perp = v_star - v_par * direction
        if np.linalg.norm(v_perp) <= 1e-12:
            return _fermat_on_line(foci, base, direction, v_par)
        # off-line minimizer; start to the side of the line
        perp = v_perp / np.linalg.norm(v_perp)
        y0 = base - perp * float(np.max(np.linalg.norm(foci - base, axis=1)))
        return _fermat_newton(foci, v_star, y0)

    return _fermat_newton(foci, v_star, foci.mean(axis=0))


def _fermat_on_line(foci, base, direction, v_par):
    t = np.sort((foci - base) @ direction)
    k = t.shape[0]
    t_centroid = float(t.mean())
    # slope of the 1-d objective after the r-th focus: (r - (k-r)) + v_par
    for r in range(k + 1):
        slope = (2 * r - k) + v_par
        if abs(slope) <= 1e-9 and 1 <= r <= k - 1:
            lo, hi = t[r - 1], t[r]
            pick = lo if abs(lo - t_centroid) <= abs(hi - t_centroid) else hi
            point = base + pick * direction
            raise CollinearDegenerate(
                "minimizer is a segment of the focal line", point)
        if slope > 0.0:
            # sign change inside the r-th focus: pinned at a kink
            point = base + t[r - 1] * direction
            return FermatPoint(point, fermat_residual(point, foci, v_par * direction),
                               0, "kink")
    raise AssertionError("unreachable: slope ends positive when ||v*|| < k")


def _fermat_newton(foci, v_star, y0, tol=1e-10, max_iter=300):
    k, d = foci.shape
    y = np.asarray(y0, dtype=float).copy()

    def objective(pt):
        return float(np.linalg.norm(foci - pt, axis=1).sum() + v_star @ pt)

    lam = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        r = foci - y
        dist = np.linalg.norm(r, axis=1)
        if dist.min() < 1e-8:
            # at a kink: the focus itself is the minimizer when the
            # remaining bearings leave a subgradient gap of at most one
            nearest = int(np.argmin(dist))
            pinned = foci[nearest].copy()
            others = np.delete(foci, nearest, axis=0)
            pull = fermat_residual(pinned, others, v_star)
            if pull <= 1.0 + 1e-12:
                return FermatPoint(pinned, fermat_residual(pinned, foci, v_star),
                                   it, "kink")
            if dist[nearest] < 1e-12:  # sitting exactly on a non-optimal kink
                y = pinned + 1e-9
                continue
        u = r / dist[:, None]
        grad = -u.sum(axis=0) + v_star
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            break
        hess = np.zeros((d, d))
        for ui, di in zip(u, dist):
            hess += (np.eye(d) - np.outer(ui, ui)) / di
        # Levenberg damping: the Hessian is a sum of scaled projectors and
        # goes singular along the shared direction of nearly parallel
        # bearings, where an undamped Newton step stalls out
        f0 = objective(y)
        flat = 64.0 * np.finfo(float).eps * max(1.0, abs(f0))
        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(hess + lam * np.eye(d), -grad)
            except np.linalg.LinAlgError:
                step = -grad if lam == 0.0 else -grad / lam
            cand = y + step
            if np.isfinite(cand).all():
                fc = objective(cand)
                # near the floor the objective is flat to roundoff while the
                # analytic gradient still resolves; track its norm instead
                if fc < f0 or (fc <= f0 + flat
                               and fermat_residual(cand, foci, v_star) < gnorm):
                    y = cand
                    lam = 0.0 if lam < 1e-12 else lam / 3.0
                    accepted = True
                    break
            lam = max(lam * 10.0, 1e-12)
        if not accepted:
            break
    return FermatPoint(y, fermat_residual(y, foci, v_star), it, "newton")


# ---------------------------------------------------------------------------
# bearing persistence

class PersistenceStatus(enum.Enum):
    PERSISTENT_UP_TO_SAMPLING = "persistent-up-to-sampling"
    NON_PERSISTENT_WITNESS = "non-persistent-witness"


@dataclass(frozen=True, eq=False)
class PersistenceReport:
    """Outcome of the randomized persistence falsification search.

    A witness is a pair (target, candidate) of formations on the same
    graph whose per-node bearing sums agree to `residual` but that are not
    equivalent (per classify_pair).  Absence of a witness after all trials
    is only evidence up to sampling, hence the status name.
    """
    status: PersistenceStatus
    trials: int
    witness: Optional[tuple]
    residual: Optional[float]


def node_bearing_residual(f, target):
    """Max over nodes of ||sum_j (u_ij - u*_ij)|| against a BearingTarget."""
    pos = f.positions
    worst = 0.0
    for i in range(1, f.graph.n + 1):
        acc = np.zeros(f.d)
        for j in f.graph.out_neighbors(i):
            r = pos[j - 1] - pos[i - 1]
            dist = float(np.linalg.norm(r))
            u = r / dist if dist > f.eps_c else np.zeros(f.d)
            acc = acc + (u - target.unit(i, j))
        worst = max(worst, float(np.linalg.norm(acc)))
    return worst


def _sample_target(rng, graph, d, min_edge=0.1, attempts=200):
    for _ in range(attempts):
        x = rng.uniform(-1.0, 1.0, size=(graph.n, d))
        short = any(
            np.linalg.norm(x[j - 1] - x[i - 1]) < min_edge
            for i, j in graph.edges
        )
        if not short:
            return Formation.from_positions(graph, x)
    return None


def _cascade_candidate(rng, graph, target_f, target):
    """Place nodes leaf-first so every per-node bearing sum is met exactly.

    Leaves land anywhere; single-follower nodes sit on the target bearing
    ray at a rescaled distance; nodes with several followers solve the
    Fermat condition sum_j u_ij = sum_j u*_ij.
    """
    n, d = graph.n, target_f.d
    degrees = cascade_degrees(graph)
    order = sorted(range(1, n + 1), key=lambda v: degrees[v])
    x = np.zeros((n, d))
    tpos = target_f.positions
    for v in order:
        outs = sorted(graph.out_neighbors(v))
        if not outs:
            x[v - 1] = rng.uniform(-1.0, 1.0, size=d)
        elif len(outs) == 1:
            j = outs[0]
            dist = float(np.linalg.norm(tpos[j - 1] - tpos[v - 1]))
            scale = rng.uniform(1.4, 2.2)
            x[v - 1] = x[j - 1] - dist * scale * target.unit(v, j)
        else:
            v_star = np.zeros(d)
            for j in outs:
                v_star = v_star + target.unit(v, j)
            sol = fermat_equilibrium(np.array([x[j - 1] for j in outs]), v_star)
            if sol.residual > 1e-8:
                return None
            x[v - 1] = sol.point
    return Formation.from_positions(graph, x)


def _flow_candidate(rng, graph, target_f, target):
    """Random start, directed formation flow, then Gauss-Newton polish."""
    from bearing_flows.controllers import ControllerKind
    from bearing_flows.sim import SimConfig, simulate

    n, d = graph.n, target_f.d
    x0 = rng.uniform(-2.0, 2.0, size=(n, d))
    f0 = Formation.from_positions(graph, x0)
    traj = simulate(f0, ControllerKind.FORMATION_DIRECTED,
                    SimConfig(dt=1e-3, t_max=40.0, stop_tol=1e-10), target=target)
    x = traj.states[-1].reshape(n, d).copy()

    for _ in range(60):
        res = np.zeros((n, d))
        jac = np.zeros((n * d, n * d))
        degenerate = False
        for i in range(1, n + 1):
            for j in graph.out_neighbors(i):
                r = x[j - 1] - x[i - 1]
                dist = float(np.linalg.norm(r))
                if dist < 1e-9:
                    degenerate = True
                    break
                u = r / dist
                res[i - 1] += u - target.unit(i, j)
                block = (np.eye(d) - np.outer(u, u)) / dist
                bi = (i - 1) * d
                bj = (j - 1) * d
                jac[bi:bi + d, bj:bj + d] += block
                jac[bi:bi + d, bi:bi + d] -= block
            if degenerate:
                break
        if degenerate:
            return None
        rnorm = float(np.linalg.norm(res.reshape(-1), ord=np.inf))
        if rnorm < 1e-12:
            break
        step, *_ = np.linalg.lstsq(jac, -res.reshape(-1), rcond=None)
        if float(np.linalg.norm(step)) > 10.0:
            step *= 10.0 / float(np.linalg.norm(step))
        x = x + step.reshape(n, d)
    try:
        return Formation.from_positions(graph, x)
    except ValueError:
        return None


def persistence_check(graph, d, trials=20, seed=0):
    """Randomized search for a violation of bearing persistence.

    For each trial a random target formation is drawn, then a candidate
    matching every per-node bearing sum is constructed: exactly (leaf-first
    cascade) when the graph is a DAG, otherwise by flowing the directed
    formation controller and polishing the root.  A candidate within 1e-8
    that classify_pair calls none-of-these is returned as a witness.
    """
    rng = np.random.default_rng(seed)
    conn = classify_connectivity(graph)
    for trial in range(trials):
        target_f = _sample_target(rng, graph, d)
        if target_f is None:
            continue
        try:
            target = BearingTarget.from_formation(target_f)
        except DegenerateFormation:
            continue
        try:
            if conn.is_dag:
                cand = _cascade_candidate(rng, graph, target_f, target)
            else:
                cand = _flow_candidate(rng, graph, target_f, target)
        except (Infeasible, CollinearDegenerate):
            cand = None
        if cand is None:
            continue
        residual = node_bearing_residual(cand, target)
        if residual >= 1e-8:
            continue
        if classify_pair(cand, target_f) is PairClass.DISTINCT:
            return PersistenceReport(
                status=PersistenceStatus.NON_PERSISTENT_WITNESS,
                trials=trial + 1, witness=(target_f, cand), residual=residual,
            )
    return PersistenceReport(
        status=PersistenceStatus.PERSISTENT_UP_TO_SAMPLING,
        trials=trials, witness=None, residual=None,
    )


# ---------------------------------------------------------------------------
# aggregate report

@dataclass(frozen=True, eq=False)
class CertificateReport:
    nu: Optional[NuEstimate]
    t_reach_bound: Optional[float]
    conjecture: Optional[ConjectureBound]
    spectrum: Optional[SpectrumReport]
    rigidity: Optional[object]
    persistence: Optional[PersistenceReport]


KNOWN_CERTIFICATES = ("nu", "conjecture", "spectrum", "rigidity", "persistence")


def certificate_report(formation, requests, target_formation=None,
                       restarts=64, trials=20, seed=0):
    """Run the requested certificates against one formation.

    `requests` is an iterable of names from KNOWN_CERTIFICATES.  The
    spectrum is evaluated at target_formation when given, else at the
    formation itself; `nu` implies the finite-time reach bound.
    """
    requests = tuple(requests)
    unknown = [r for r in requests if r not in KNOWN_CERTIFICATES]
    if unknown:
        raise ValueError(f"unknown certificates: {', '.join(sorted(unknown))}")

    nu = t_bound = conj = spec = rig = persist = None
    if "nu" in requests:
        nu = estimate_nu(formation.graph, formation.d, restarts=restarts, seed=seed)
        t_bound = finite_time_bound(formation, nu) if nu.value > 0 else math.inf
    if "conjecture" in requests:
        conj = conjecture_bound(formation)
    if "spectrum" in requests:
        at = target_formation if target_formation is not None else formation
        spec = jacobian_spectrum(at)
    if "rigidity" in requests:
        rig = is_bearing_rigid(formation)
    if "persistence" in requests:
        persist = persistence_check(formation.graph, formation.d,
                                    trials=trials, seed=seed)
    return CertificateReport(nu=nu, t_reach_bound=t_bound, conjecture=conj,
                             spectrum=spec, rigidity=rig, persistence=persist)


def _spectrum_json(vals):
    return [[float(v.real), float(v.imag)] for v in vals]


def report_to_json(report):
    """CertificateReport as plain JSON-ready data."""
    out = {}
    if report.nu is not None:
        out["nu"] = {
            "value": report.nu.value,
            "restarts": report.nu.restarts,
            "minimizer": [float(v) for v in report.nu.minimizer],
            "stratum": [list(g) for g in report.nu.stratum],
            "strata_searched": report.nu.strata_searched,
        }
        out["t_reach_bound"] = report.t_reach_bound
    if report.conjecture is not None:
        c = report.conjecture
        out["conjecture"] = {
            "n": c.n,
            "cycle_length": c.cycle_length,
            "cycle": list(c.cycle),
            "bound": c.bound,
            "caption_variant": c.caption_variant,
            "degenerate": c.degenerate,
        }
    if report.spectrum is not None:
        s = report.spectrum
        out["spectrum"] = {
            "jacobian": _spectrum_json(s.jacobian_eigenvalues),
            "minus_bearing_laplacian": _spectrum_json(s.minus_laplacian_eigenvalues),
            "max_real_jacobian": s.max_real_jacobian,
            "max_real_minus_laplacian": s.max_real_minus_laplacian,
        }
    if report.rigidity is not None:
        r = report.rigidity
        out["rigidity"] = {
            "rigid": r.rigid,
            "rank": r.rank,
            "required_rank": r.required_rank,
        }
    if report.persistence is not None:
        p = report.persistence
        entry = {"status": p.status.value, "trials": p.trials}
        if p.witness is not None:
            target_f, cand = p.witness
            entry["residual"] = p.residual
            entry["witness"] = {
                "target": target_f.to_json(),
                "candidate": cand.to_json(),
            }
        out["persistence"] = entry
    return out
