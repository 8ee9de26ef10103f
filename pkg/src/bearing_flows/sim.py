"""Fixed-step simulation of bearing flows.

`simulate` integrates one of the four controller kinds from an initial
formation and returns a recorded `Trajectory`.  Integration is explicit
Euler with an optional cluster-capture rule that resolves the contact
discontinuity for the consensus flows: agents driven into contact within a
step are collapsed onto a common point when the disagreement pulling them
apart is too weak to separate them, which removes chattering at coincidence
without shrinking the step size.
"""
import enum
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bearing_flows.controllers import ControllerKind, phi_tilde, psi, target_rows, velocity, _validate
from bearing_flows.engine import core
from bearing_flows.geometry import BearingTarget, Formation


class StopReason(enum.Enum):
    CONVERGED = "converged"
    TIME_LIMIT = "time-limit"
    NUMERICAL_FAILURE = "numerical-failure"


_STOP_BY_CODE = {0: StopReason.CONVERGED, 1: StopReason.TIME_LIMIT,
                 2: StopReason.NUMERICAL_FAILURE}


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    stop_tol is compared against the running stop metric: the largest
    pairwise distance for consensus flows, the largest per-edge bearing
    error for formation flows.  eps_c overrides the contact threshold
    derived from the initial formation.  record_every keeps one state out
    of that many steps (the initial and final states are always kept).
    """
    dt: float = 1e-3
    t_max: float = 10.0
    stop_tol: float = 1e-6
    eps_c: Optional[float] = None
    merge_clusters: bool = True
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_max < 0.0:
            raise ValueError("t_max must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass(frozen=True)
class MonitorRecord:
    """Scalar monitors of a single formation state."""
    phi_tilde: float
    psi: float
    v_max_dist: float
    grad_norm: float
    centroid: tuple


@dataclass(eq=False)
class Trajectory:
    """Recorded output of one simulation run.

    states[k] is the flat agent configuration at times[k]; monitor arrays
    are aligned with times.  t_converge is the first recorded time at which
    the stop metric was below tolerance (None unless stop_reason is
    CONVERGED).
    """
    kind: ControllerKind
    n: int
    d: int
    dt: float
    times: np.ndarray
    states: np.ndarray
    phi_tilde: np.ndarray
    psi: np.ndarray
    v_max_dist: np.ndarray
    grad_norm: np.ndarray
    centroid: np.ndarray
    stop_reason: StopReason
    t_converge: Optional[float]
    steps_done: int

    def positions(self, k):
        """Agent coordinates at record index k, shape (n, d)."""
        return self.states[k].reshape(self.n, self.d)

    def final_formation(self, graph):
        return Formation(graph, self.d, self.states[-1].copy())

    def to_csv(self, target):
        """Write the recorded series as CSV.

        target may be a path or a text file object.  Floats are written
        with repr so output is reproducible byte for byte.
        """
        if hasattr(target, "write"):
            self._write_csv(target)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                self._write_csv(fh)

    def csv_text(self):
        buf = io.StringIO()
        self._write_csv(buf)
        return buf.getvalue()

    def _write_csv(self, fh):
        cols = ["t"]
        cols += [f"x_{i + 1}_{a + 1}" for i in range(self.n) for a in range(self.d)]
        cols += ["phi_tilde", "psi", "V", "grad_norm"]
        cols += [f"cx_{a + 1}" for a in range(self.d)]
        fh.write(",".join(cols) + "\n")
        for k in range(self.times.shape[0]):
            row = [self.times[k]]
            row += list(self.states[k])
            row += [self.phi_tilde[k], self.psi[k], self.v_max_dist[k],
                    self.grad_norm[k]]
            row += list(self.centroid[k])
            fh.write(",".join(repr(float(val)) for val in row) + "\n")


def monitor_step(formation, kind, target=None):
    """Monitors of one state, computed independently of the kernel."""
    kind = ControllerKind(kind)
    v = velocity(kind, formation, target)
    x = formation.positions
    if formation.graph.n > 1:
        diff = x[:, None, :] - x[None, :, :]
        vmax = float(np.sqrt((diff * diff).sum(axis=2)).max())
    else:
        vmax = 0.0
    tgt = target if kind.is_formation else None
    return MonitorRecord(
        phi_tilde=phi_tilde(formation),
        psi=psi(formation, tgt),
        v_max_dist=vmax,
        grad_norm=float(np.linalg.norm(v)),
        centroid=tuple(float(c) for c in formation.centroid()),
    )


def _kernel_args(formation, kind, target, cfg):
    graph = formation.graph
    n, d = graph.n, formation.d
    edges = graph.edges
    tails = np.array([e[0] - 1 for e in edges], dtype=np.int32)
    heads = np.array([e[1] - 1 for e in edges], dtype=np.int32)
    ustar = target_rows(formation, target) if kind.is_formation else np.zeros((len(edges), d))

    edge_index = {e: idx for idx, e in enumerate(edges)}
    oidx = np.array(
        [edge_index[(i, j)] if (i, j) in edge_index else edge_index[(j, i)]
         for i, j in graph.orientation],
        dtype=np.int32,
    )

    pairs = graph.adjacency_pairs()
    pair_a = np.array([p[0] - 1 for p in pairs], dtype=np.int32)
    pair_b = np.array([p[1] - 1 for p in pairs], dtype=np.int32)
    pair_mult = np.array([p[2] for p in pairs], dtype=np.int32)
    stationary = np.array(
        [1 if graph.out_degree(i) == 0 else 0 for i in range(1, n + 1)],
        dtype=np.uint8,
    )
    eps_c = cfg.eps_c if cfg.eps_c is not None else formation.eps_c
    n_steps = int(math.ceil(cfg.t_max / cfg.dt - 1e-9))
    merge = bool(cfg.merge_clusters and not kind.is_formation)
    return dict(
        x0=formation.x.astype(np.float64, copy=True), n=n, d=d,
        tails=tails, heads=heads, ustar=np.ascontiguousarray(ustar),
        is_formation=bool(kind.is_formation), oidx=oidx,
        pair_a=pair_a, pair_b=pair_b, pair_mult=pair_mult,
        stationary=stationary, dt=float(cfg.dt), n_steps=n_steps,
        stop_tol=float(cfg.stop_tol), eps_c=float(eps_c),
        merge=merge, stride=int(cfg.record_every),
    )


def simulate(formation, kind, cfg=None, target=None):
    """Integrate a bearing flow and return its recorded trajectory.

    formation gives the initial state and interaction graph; kind selects
    the controller; formation kinds require a BearingTarget.  Raises the
    controller validation errors up front, before any stepping.
    """
    kind = ControllerKind(kind)
    cfg = cfg if cfg is not None else SimConfig()
    if target is not None and not isinstance(target, BearingTarget):
        raise TypeError("target must be a BearingTarget")
    _validate(kind, formation, target)
    if kind.is_formation:
        target_rows(formation, target)  # surfaces TargetMissingEdge early

    args = _kernel_args(formation, kind, target, cfg)
    out = core.run(**args)
    stop = _STOP_BY_CODE[int(out["stop_code"])]
    t_conv = float(out["t_converge"]) if stop is StopReason.CONVERGED else None
    return Trajectory(
        kind=kind, n=formation.graph.n, d=formation.d, dt=cfg.dt,
        times=out["times"], states=out["states"], phi_tilde=out["phi"],
        psi=out["psi"], v_max_dist=out["vmax"], grad_norm=out["gnorm"],
        centroid=out["centroid"], stop_reason=stop, t_converge=t_conv,
        steps_done=int(out["steps_done"]),
    )
