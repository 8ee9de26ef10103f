"""The four bearing-only control laws and their potentials.

Every agent moves with the sum of current bearings toward the agents it
senses, minus the target bearings when a formation is prescribed:

    consensus:  dx_i/dt = sum_j u_ij
    formation:  dx_i/dt = sum_j (u_ij - u*_ij)

with j ranging over out-neighbors.  Undirected kinds require a symmetric
edge set, in which case the sum runs over all neighbors and the flow is the
negative gradient of phi_tilde (consensus) or psi (formation).
"""
from __future__ import annotations

import enum

import numpy as np

from bearing_flows.geometry import (
    MissingTarget,
    TargetMissingEdge,
    directed_bearings,
)

__all__ = [
    "ControllerKind",
    "MissingTarget",
    "TargetMissingEdge",
    "velocity",
    "private_potential",
    "phi_tilde",
    "psi",
]


class ControllerKind(enum.Enum):
    CONSENSUS_UNDIRECTED = "consensus-undirected"
    CONSENSUS_DIRECTED = "consensus-directed"
    FORMATION_UNDIRECTED = "formation-undirected"
    FORMATION_DIRECTED = "formation-directed"

    @property
    def is_formation(self):
        return self in (ControllerKind.FORMATION_UNDIRECTED, ControllerKind.FORMATION_DIRECTED)

    @property
    def is_undirected(self):
        return self in (ControllerKind.CONSENSUS_UNDIRECTED, ControllerKind.FORMATION_UNDIRECTED)

    @classmethod
    def from_flags(cls, controller, topology):
        key = (controller, topology)
        table = {
            ("consensus", "undirected"): cls.CONSENSUS_UNDIRECTED,
            ("consensus", "directed"): cls.CONSENSUS_DIRECTED,
            ("formation", "undirected"): cls.FORMATION_UNDIRECTED,
            ("formation", "directed"): cls.FORMATION_DIRECTED,
        }
        if key not in table:
            raise ValueError(f"unknown controller/topology pair {key}")
        return table[key]


def target_rows(f, target):
    """Target bearings per directed edge, zeros for consensus use."""
    rows = np.zeros((f.graph.m_directed, f.d))
    if target is not None:
        for k, (i, j) in enumerate(f.graph.edges):
            rows[k] = target.unit(i, j)
    return rows


def _validate(kind, f, target):
    if kind.is_undirected and not f.graph.is_undirected:
        raise ValueError("undirected controller on a non-symmetric edge set")
    if kind.is_formation and target is None:
        raise MissingTarget("formation controller needs a bearing target")


def velocity(kind, f, target=None):
    """Stacked controller velocities, (n, d)."""
    _validate(kind, f, target)
    u = directed_bearings(f)
    ustar = target_rows(f, target if kind.is_formation else None)
    v = np.zeros((f.n, f.d))
    for k, (i, _) in enumerate(f.graph.edges):
        v[i - 1] += u[k] - ustar[k]
    return v


def private_potential(kind, f, i, target=None):
    """Per-agent potential: out-edge distance sum, or the bearing-error form."""
    _validate(kind, f, target)
    pos = f.positions
    total = 0.0
    eps = f.eps_c
    for (a, j) in f.graph.edges:
        if a != i:
            continue
        r = pos[j - 1] - pos[i - 1]
        dist = float(np.linalg.norm(r))
        if not kind.is_formation:
            total += dist
        else:
            u = r / dist if dist > eps else np.zeros(f.d)
            du = u - target.unit(i, j)
            total += 0.5 * dist * float(du @ du)
    return total


def phi_tilde(f):
    """Total edge length over the orientation representatives."""
    pos = f.positions
    total = 0.0
    for (i, j) in f.graph.orientation:
        total += float(np.linalg.norm(pos[j - 1] - pos[i - 1]))
    return total


def psi(f, target):
    """Distance-weighted bearing error, each edge class once.

    With target None the error is taken against zero bearings, which reduces
    to phi_tilde / 2; this is the value consensus runs record.
    """
    pos = f.positions
    eps = f.eps_c
    total = 0.0
    for (i, j) in f.graph.orientation:
        r = pos[j - 1] - pos[i - 1]
        dist = float(np.linalg.norm(r))
        u = r / dist if dist > eps else np.zeros(f.d)
        du = u - target.unit(i, j) if target is not None else u
        total += 0.5 * dist * float(du @ du)
    return total
