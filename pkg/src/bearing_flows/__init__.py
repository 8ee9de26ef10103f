"""Bearing-only multi-agent flows: simulation and convergence certificates."""

from bearing_flows.analysis import (
    KNOWN_CERTIFICATES,
    CertificateReport,
    CollinearDegenerate,
    ConjectureBound,
    DisconnectedGraph,
    FermatPoint,
    Infeasible,
    NoHamiltonianCycle,
    NonPositiveNu,
    NuEstimate,
    PersistenceReport,
    PersistenceStatus,
    SpectrumReport,
    TooLarge,
    certificate_report,
    conjecture_bound,
    estimate_nu,
    fermat_equilibrium,
    fermat_residual,
    finite_time_bound,
    jacobian_spectrum,
    node_bearing_residual,
    persistence_check,
    report_to_json,
)
from bearing_flows.controllers import (
    ControllerKind,
    phi_tilde,
    private_potential,
    psi,
    velocity,
)
from bearing_flows.engine import BACKEND
from bearing_flows.geometry import (
    BearingTarget,
    DegenerateFormation,
    Formation,
    FormationMatrices,
    GraphMismatch,
    MissingTarget,
    PairClass,
    RigidityReport,
    TargetMissingEdge,
    ZeroVector,
    bearing,
    bearing_laplacian,
    classify_pair,
    directed_jacobian,
    formation_matrices,
    is_bearing_rigid,
    projection_matrix,
    rigidity_matrix,
    weighted_laplacian,
)
from bearing_flows.graphs import (
    DirectedGraph,
    IncidenceMatrices,
    NotADAG,
    cascade_degrees,
    classify_connectivity,
    incidence,
)
from bearing_flows.sim import (
    MonitorRecord,
    SimConfig,
    StopReason,
    Trajectory,
    monitor_step,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BearingTarget",
    "CertificateReport",
    "CollinearDegenerate",
    "ConjectureBound",
    "ControllerKind",
    "DegenerateFormation",
    "DirectedGraph",
    "DisconnectedGraph",
    "FermatPoint",
    "Formation",
    "FormationMatrices",
    "GraphMismatch",
    "IncidenceMatrices",
    "Infeasible",
    "KNOWN_CERTIFICATES",
    "MissingTarget",
    "MonitorRecord",
    "NoHamiltonianCycle",
    "NonPositiveNu",
    "NotADAG",
    "NuEstimate",
    "PairClass",
    "PersistenceReport",
    "PersistenceStatus",
    "RigidityReport",
    "SimConfig",
    "SpectrumReport",
    "StopReason",
    "TargetMissingEdge",
    "TooLarge",
    "Trajectory",
    "ZeroVector",
    "bearing",
    "bearing_laplacian",
    "cascade_degrees",
    "certificate_report",
    "classify_connectivity",
    "classify_pair",
    "conjecture_bound",
    "directed_jacobian",
    "estimate_nu",
    "fermat_equilibrium",
    "fermat_residual",
    "finite_time_bound",
    "formation_matrices",
    "incidence",
    "is_bearing_rigid",
    "jacobian_spectrum",
    "monitor_step",
    "node_bearing_residual",
    "persistence_check",
    "phi_tilde",
    "private_potential",
    "projection_matrix",
    "psi",
    "report_to_json",
    "rigidity_matrix",
    "simulate",
    "velocity",
    "weighted_laplacian",
    "__version__",
]
