"""Formations, bearing targets, and the matrix objects built from them.

A formation is a graph plus a stacked configuration x in R^(d*n).  Bearings
follow the zero convention: the bearing of a pair closer than the coincidence
threshold is the zero vector, which is the selection used by the nonsmooth
flow on the coincidence set.  The threshold scales with the formation
diameter (1e-9 relative, 1e-12 absolute floor) so that sub-resolution
separations are treated as contact without affecting ordinary geometry.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from bearing_flows.graphs import DirectedGraph, incidence

EPS_FLOOR = 1e-12


class ZeroVector(ValueError):
    """Projection of a vector shorter than the tolerance."""


class MissingTarget(ValueError):
    """A target-dependent matrix was requested without a target formation."""


class GraphMismatch(ValueError):
    """Two formations do not share graph and ambient dimension."""


class DegenerateFormation(ValueError):
    """An operation met coincident endpoints where a direction is required."""


class TargetMissingEdge(KeyError):
    """A bearing target lacks an edge present in the graph."""


def bearing(xi, xj, eps=EPS_FLOOR):
    """Unit vector from xi toward xj; zero when closer than eps."""
    r = np.asarray(xj, dtype=float) - np.asarray(xi, dtype=float)
    dist = float(np.linalg.norm(r))
    if dist <= eps:
        return np.zeros_like(r)
    return r / dist


def projection_matrix(v, eps=EPS_FLOOR):
    """Orthogonal projector onto the complement of span(v)."""
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv <= eps:
        raise ZeroVector("cannot project along a (near) zero vector")
    u = v / nv
    return np.eye(len(v)) - np.outer(u, u)


def coincidence_threshold(f):
    """Contact threshold for a formation (or raw (n,d) positions)."""
    pos = f.positions if isinstance(f, Formation) else np.asarray(f, dtype=float)
    diam = 0.0
    n = pos.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            diam = max(diam, float(np.linalg.norm(pos[j] - pos[i])))
    return max(1e-9 * diam, EPS_FLOOR)


@dataclass(frozen=True, eq=False)
class Formation:
    graph: DirectedGraph
    d: int
    x: np.ndarray

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise ValueError("ambient dimension must be positive")
        x = np.array(self.x, dtype=float).ravel()
        if x.size != d * self.graph.n:
            raise ValueError(
                f"configuration has {x.size} entries, expected {d * self.graph.n}"
            )
        if not np.isfinite(x).all():
            raise ValueError("configuration must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_positions(cls, graph, positions):
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2 or positions.shape[0] != graph.n:
            raise ValueError(f"expected a ({graph.n}, d) position array")
        return cls(graph, positions.shape[1], positions.ravel())

    @property
    def n(self):
        return self.graph.n

    @property
    def positions(self):
        return self.x.reshape(self.n, self.d)

    @property
    def eps_c(self):
        return coincidence_threshold(self)

    @property
    def diameter(self):
        pos = self.positions
        diam = 0.0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                diam = max(diam, float(np.linalg.norm(pos[j] - pos[i])))
        return diam

    def centroid(self):
        return self.positions.mean(axis=0)

    def to_json(self):
        return {"d": self.d, "positions": [list(map(float, p)) for p in self.positions]}

    @classmethod
    def from_json(cls, graph, obj):
        pos = np.asarray(obj["positions"], dtype=float)
        if pos.ndim != 2 or pos.shape[1] != int(obj["d"]):
            raise ValueError("positions do not match the declared dimension")
        return cls.from_positions(graph, pos)


@dataclass(frozen=True, eq=False)
class BearingTarget:
    """Unit target bearings keyed by directed edge.

    Reverse directions are derived by antisymmetry when only one direction is
    stored.  Vectors must be unit to 1e-9; when both directions are supplied
    they must be antisymmetric to 1e-12.
    """

    graph: DirectedGraph
    d: int
    vectors: dict

    def __post_init__(self):
        eset = set(self.graph.edges)
        clean = {}
        for key, vec in self.vectors.items():
            i, j = int(key[0]), int(key[1])
            if (i, j) not in eset:
                raise ValueError(f"target bearing for ({i},{j}) which is not an edge")
            v = np.array(vec, dtype=float).ravel()
            if v.size != self.d:
                raise ValueError(f"target bearing for ({i},{j}) has wrong dimension")
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"target bearing for ({i},{j}) is not a unit vector")
            v.setflags(write=False)
            clean[(i, j)] = v
        for (i, j), v in clean.items():
            if (j, i) in clean and np.max(np.abs(clean[(j, i)] + v)) > 1e-12:
                raise ValueError(f"target bearings for ({i},{j}) and ({j},{i}) not antisymmetric")
        object.__setattr__(self, "vectors", clean)

    @classmethod
    def from_formation(cls, f):
        eps = f.eps_c
        pos = f.positions
        vecs = {}
        for (i, j) in f.graph.edges:
            r = pos[j - 1] - pos[i - 1]
            dist = float(np.linalg.norm(r))
            if dist <= eps:
                raise DegenerateFormation(
                    f"target formation has coincident endpoints on edge ({i},{j})"
                )
            vecs[(i, j)] = r / dist
        return cls(f.graph, f.d, vecs)

    @classmethod
    def from_vectors(cls, graph, d, mapping):
        return cls(graph, int(d), dict(mapping))

    def unit(self, i, j):
        if (i, j) in self.vectors:
            return self.vectors[(i, j)]
        if (j, i) in self.vectors:
            return -self.vectors[(j, i)]
        raise TargetMissingEdge(f"no target bearing for edge ({i},{j})")

    def stacked(self, edges):
        return np.array([self.unit(i, j) for (i, j) in edges])

    def to_json(self):
        return {
            "bearings": {f"{i},{j}": list(map(float, v)) for (i, j), v in sorted(self.vectors.items())}
        }


def directed_bearings(f):
    """Bearings for every directed edge of the graph, (m_directed, d)."""
    eps = f.eps_c
    pos = f.positions
    out = np.zeros((f.graph.m_directed, f.d))
    for k, (i, j) in enumerate(f.graph.edges):
        r = pos[j - 1] - pos[i - 1]
        dist = float(np.linalg.norm(r))
        if dist > eps:
            out[k] = r / dist
    return out


def stacked_bearings(f):
    """Bearings for the orientation representatives, (m, d)."""
    eps = f.eps_c
    pos = f.positions
    orient = f.graph.orientation
    out = np.zeros((len(orient), f.d))
    for k, (i, j) in enumerate(orient):
        r = pos[j - 1] - pos[i - 1]
        dist = float(np.linalg.norm(r))
        if dist > eps:
            out[k] = r / dist
    return out


def weighted_laplacian(f):
    """Laplacian with inverse-distance weights, zero on contact pairs (n x n)."""
    eps = f.eps_c
    pos = f.positions
    L = np.zeros((f.n, f.n))
    for (i, j) in f.graph.orientation:
        dist = float(np.linalg.norm(pos[j - 1] - pos[i - 1]))
        w = 1.0 / dist if dist > eps else 0.0
        L[i - 1, i - 1] += w
        L[j - 1, j - 1] += w
        L[i - 1, j - 1] -= w
        L[j - 1, i - 1] -= w
    return L


def _edge_blocks(f, scaled):
    """Per-orientation-edge projectors P(u_k), optionally scaled by 1/d_k."""
    eps = f.eps_c
    pos = f.positions
    blocks = []
    for (i, j) in f.graph.orientation:
        r = pos[j - 1] - pos[i - 1]
        dist = float(np.linalg.norm(r))
        if dist <= eps:
            raise DegenerateFormation(
                f"edge ({i},{j}) has coincident endpoints; no direction defined"
            )
        u = r / dist
        P = np.eye(f.d) - np.outer(u, u)
        blocks.append(P / dist if scaled else P)
    return blocks


def rigidity_matrix(f):
    """Jacobian of the stacked orientation bearings w.r.t. x, (d*m x d*n)."""
    d, n = f.d, f.n
    blocks = _edge_blocks(f, scaled=True)
    R = np.zeros((d * len(blocks), d * n))
    for k, (i, j) in enumerate(f.graph.orientation):
        R[d * k : d * k + d, d * (j - 1) : d * j] = blocks[k]
        R[d * k : d * k + d, d * (i - 1) : d * i] = -blocks[k]
    return R


def _block_diag(blocks):
    d = blocks[0].shape[0]
    m = len(blocks)
    out = np.zeros((d * m, d * m))
    for k, b in enumerate(blocks):
        out[d * k : d * k + d, d * k : d * k + d] = b
    return out


def _check_same_graph(f, target):
    if target.graph.n != f.graph.n or set(target.graph.edges) != set(f.graph.edges) or target.d != f.d:
        raise GraphMismatch("target formation does not share graph and dimension")


def bearing_laplacian(f, target):
    """H_plus diag(P(u*)) H^T inflated to dn x dn, target bearings from `target`."""
    if target is None:
        raise MissingTarget("bearing Laplacian needs a target formation")
    _check_same_graph(f, target)
    Ht, Hpt = incidence(f.graph).inflated(f.d)
    return Hpt @ _block_diag(_edge_blocks(target, scaled=False)) @ Ht.T


def directed_jacobian(target):
    """Linearization -H_plus diag(P(u*)/d*) H^T at the target formation."""
    if target is None:
        raise MissingTarget("directed Jacobian needs a target formation")
    Ht, Hpt = incidence(target.graph).inflated(target.d)
    return -Hpt @ _block_diag(_edge_blocks(target, scaled=True)) @ Ht.T


@dataclass(frozen=True, eq=False)
class FormationMatrices:
    weighted_laplacian: np.ndarray
    weighted_laplacian_inflated: np.ndarray
    rigidity: np.ndarray
    bearing_laplacian: np.ndarray | None
    directed_jacobian: np.ndarray | None


def formation_matrices(f, target=None):
    L = weighted_laplacian(f)
    LB = Jd = None
    if target is not None:
        _check_same_graph(f, target)
        LB = bearing_laplacian(f, target)
        Jd = directed_jacobian(target)
    return FormationMatrices(
        weighted_laplacian=L,
        weighted_laplacian_inflated=np.kron(L, np.eye(f.d)),
        rigidity=rigidity_matrix(f),
        bearing_laplacian=LB,
        directed_jacobian=Jd,
    )


class PairClass(enum.Enum):
    IDENTICAL = "identical"
    CONGRUENT = "congruent"
    SIMILAR = "similar"
    EQUIVALENT = "equivalent"
    DISTINCT = "none-of-these"


def classify_pair(f, g, tol=1e-6):
    """Strictest matching relation between two formations on the same graph.

    Tested in order identical -> congruent (translation) -> similar (positive
    scaling plus translation) -> equivalent (all edge bearings agree) ->
    none-of-these.  `tol` is absolute on positions and on bearing differences.
    """
    if f.graph.n != g.graph.n or set(f.graph.edges) != set(g.graph.edges) or f.d != g.d:
        raise GraphMismatch("formations live on different graphs or dimensions")

    pf, pg = f.positions, g.positions
    if np.max(np.abs(pf - pg)) <= tol:
        return PairClass.IDENTICAL

    diffs = pf - pg
    if np.max(np.abs(diffs - diffs.mean(axis=0))) <= tol:
        return PairClass.CONGRUENT

    cf = pf - pf.mean(axis=0)
    cg = pg - pg.mean(axis=0)
    ng = float(np.linalg.norm(cg))
    if ng > tol:
        s = float(np.linalg.norm(cf)) / ng
        if s > 0 and np.max(np.abs(cf - s * cg)) <= tol:
            return PairClass.SIMILAR

    # equivalence: every directed edge shows the same bearing
    uf = directed_bearings(f)
    ug_all = directed_bearings(g)
    order = {e: k for k, e in enumerate(f.graph.edges)}
    ug = np.array([ug_all[order[e]] for e in f.graph.edges]) if f.graph.edges == g.graph.edges else None
    if ug is None:
        gorder = {e: k for k, e in enumerate(g.graph.edges)}
        ug = np.array([ug_all[gorder[e]] for e in f.graph.edges])
    if np.max(np.linalg.norm(uf - ug, axis=1)) <= tol:
        return PairClass.EQUIVALENT
    return PairClass.DISTINCT


@dataclass(frozen=True)
class RigidityReport:
    rigid: bool
    rank: int
    required_rank: int
    threshold: float
    singular_values: tuple


def is_bearing_rigid(f):
    """Rank test of the bearing rigidity matrix: rigid iff rank = dn - d - 1."""
    R = rigidity_matrix(f)
    s = np.linalg.svd(R, compute_uv=False)
    thresh = 1e-10 * float(s[0]) if s.size else 0.0
    rank = int((s > thresh).sum())
    required = f.d * f.n - f.d - 1
    return RigidityReport(
        rigid=(rank == required),
        rank=rank,
        required_rank=required,
        threshold=thresh,
        singular_values=tuple(float(v) for v in s),
    )
