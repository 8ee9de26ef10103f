"""Directed sensing graphs and their incidence structure.

Vertices are labelled 1..n.  An edge (i, j) means agent i measures agent j
and steers using that bearing.  An undirected interaction is represented by
both directions being present.  Graphs are immutable; every derived topology
(symmetrization, etc.) is a new object.

Incidence conventions: each unordered edge class {i, j} gets one orientation
representative (i, j) with i < j, ordered lexicographically.  H carries +1 at
the representative tail and -1 at the head regardless of which directions are
present; H_plus keeps an entry only where the matching direction actually
exists, so the stacked per-agent sums of bearing terms equal H_plus times the
stacked representative bearings.  For symmetric graphs H_plus == H.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotADAG(ValueError):
    """Raised when an operation requires an acyclic graph."""


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    edges: tuple

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("graph needs at least one vertex")
        object.__setattr__(self, "n", int(self.n))
        clean = []
        seen = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            if i == j:
                raise ValueError(f"self loop ({i},{j}) not allowed")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            clean.append((i, j))
        object.__setattr__(self, "edges", tuple(clean))

    # -- structure ---------------------------------------------------------

    @property
    def orientation(self):
        """Unordered edge classes as (i, j) with i < j, lexicographic."""
        return tuple(sorted({(min(i, j), max(i, j)) for (i, j) in self.edges}))

    @property
    def m(self):
        return len(self.orientation)

    @property
    def m_directed(self):
        return len(self.edges)

    def out_neighbors(self, i):
        return tuple(j for (a, j) in self.edges if a == i)

    def in_neighbors(self, j):
        return tuple(a for (a, b) in self.edges if b == j)

    def out_degree(self, i):
        return len(self.out_neighbors(i))

    def has_edge(self, i, j):
        return (i, j) in set(self.edges)

    @property
    def is_undirected(self):
        eset = set(self.edges)
        return all((j, i) in eset for (i, j) in eset)

    def symmetrized(self):
        eset = set(self.edges) | {(j, i) for (i, j) in self.edges}
        return DirectedGraph(self.n, tuple(sorted(eset)))

    def adjacency_pairs(self):
        """Unordered adjacent pairs with their directed-edge multiplicity (1 or 2)."""
        count = {}
        for (i, j) in self.edges:
            key = (min(i, j), max(i, j))
            count[key] = count.get(key, 0) + 1
        return tuple((a, b, count[(a, b)]) for (a, b) in sorted(count))

    # -- serialization -----------------------------------------------------

    def to_json(self):
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["n"]), tuple((int(i), int(j)) for i, j in obj["edges"]))


@dataclass(frozen=True)
class IncidenceMatrices:
    orientation: tuple
    H: np.ndarray
    H_plus: np.ndarray

    def inflated(self, d):
        eye = np.eye(d)
        return np.kron(self.H, eye), np.kron(self.H_plus, eye)


def incidence(graph):
    """Oriented incidence H and directed oriented incidence H_plus (n x m)."""
    orient = graph.orientation
    eset = set(graph.edges)
    H = np.zeros((graph.n, len(orient)))
    Hp = np.zeros((graph.n, len(orient)))
    for k, (i, j) in enumerate(orient):
        H[i - 1, k] = 1.0
        H[j - 1, k] = -1.0
        if (i, j) in eset:
            Hp[i - 1, k] = 1.0
        if (j, i) in eset:
            Hp[j - 1, k] = -1.0
    H.setflags(write=False)
    Hp.setflags(write=False)
    return IncidenceMatrices(orient, H, Hp)


@dataclass(frozen=True)
class ConnectivityReport:
    n: int
    is_weakly_connected: bool
    is_undirected: bool
    is_dag: bool
    is_single_directed_cycle: bool
    strongly_connected_components: tuple
    globally_reachable: frozenset

    @property
    def has_globally_reachable_node(self):
        return bool(self.globally_reachable)


def _tarjan_sccs(graph):
    """Iterative Tarjan; components returned in reverse topological order."""
    n = graph.n
    adj = {i: list(graph.out_neighbors(i)) for i in range(1, n + 1)}
    index = {}
    lowlink = {}
    on_stack = set()
    stack = []
    comps = []
    counter = [0]

    for root in range(1, n + 1):
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                elif w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
    return comps


def classify_connectivity(graph):
    n = graph.n
    comps = _tarjan_sccs(graph)

    # weak connectivity by BFS on the symmetrized adjacency
    sym = {i: set() for i in range(1, n + 1)}
    for (i, j) in graph.edges:
        sym[i].add(j)
        sym[j].add(i)
    seen = {1}
    frontier = [1]
    while frontier:
        v = frontier.pop()
        for w in sym[v]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    weak = len(seen) == n

    is_dag = all(len(c) == 1 for c in comps)

    # a globally reachable node must sit in the unique sink component and be
    # reachable from everywhere; BFS on the reversed graph certifies that
    radj = {i: list(graph.in_neighbors(i)) for i in range(1, n + 1)}
    comp_of = {}
    for c in comps:
        for v in c:
            comp_of[v] = c
    sinks = []
    for c in comps:
        if all(comp_of[w] is c for v in c for w in graph.out_neighbors(v)):
            sinks.append(c)
    reachable = frozenset()
    if len(sinks) == 1:
        start = next(iter(sinks[0]))
        seen = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in radj[v]:
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        if len(seen) == n:
            reachable = sinks[0]

    out_deg = {i: graph.out_degree(i) for i in range(1, n + 1)}
    in_deg = {i: len(graph.in_neighbors(i)) for i in range(1, n + 1)}
    single_cycle = (
        n >= 2
        and len(comps) == 1
        and all(out_deg[i] == 1 for i in out_deg)
        and all(in_deg[i] == 1 for i in in_deg)
    )

    return ConnectivityReport(
        n=n,
        is_weakly_connected=weak,
        is_undirected=graph.is_undirected,
        is_dag=is_dag,
        is_single_directed_cycle=single_cycle,
        strongly_connected_components=tuple(comps),
        globally_reachable=reachable,
    )


def cascade_degrees(graph):
    """Longest directed path length to an out-degree-zero vertex, per vertex.

    Raises NotADAG when the graph has a directed cycle.
    """
    if not all(len(c) == 1 for c in _tarjan_sccs(graph)):
        raise NotADAG("cascade degrees are defined for acyclic graphs only")
    deg = {}
    remaining = set(range(1, graph.n + 1))
    while remaining:
        progressed = False
        for v in sorted(remaining):
            nbrs = graph.out_neighbors(v)
            if all(w in deg for w in nbrs):
                deg[v] = 0 if not nbrs else 1 + max(deg[w] for w in nbrs)
                remaining.discard(v)
                progressed = True
        if not progressed:  # unreachable for a DAG
            raise NotADAG("cycle detected while resolving cascade order")
    return deg
