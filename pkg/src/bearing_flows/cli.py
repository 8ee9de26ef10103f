"""Command line front end: scenario files in, CSV/JSON artifacts out.

A scenario is a single JSON document::

    {
      "name": "two-body",
      "description": "optional free text",
      "graph": {"n": 2, "edges": [[1, 2]]},
      "topology": "undirected",
      "controller": "consensus",
      "positions": [[0.0, 0.0], [2.0, 0.0]],
      "sim": {"dt": 0.001, "t_max": 10.0, "stop_tol": 1e-6},
      "analyses": ["nu"],
      "seed": 0
    }

Edges are 1-based arrows i -> j.  With "topology": "undirected" the edge
set is symmetrized before anything else is built.  Formation scenarios
need a "target": either {"positions": [[...], ...]} (bearings are read
off that shape) or {"bearings": {"1,2": [ux, uy], ...}} listing unit
vectors per oriented edge.  An optional "witness" block carries a second
position set for persistence validation.

Subcommands:

    simulate  scenario.json [...]   integrate the flow, write the series
    analyze   scenario.json         run certificates, write one JSON report
    reproduce <name>                rerun a bundled experiment end to end

Exit codes: 0 when every run converged (for `reproduce`, when the bundled
check passed), 2 when a run ended at the time limit, 1 on any error.
Nothing is written when parsing or validation fails.  `simulate` accepts
several scenarios and runs them concurrently; BEARING_FLOWS_THREADS caps
the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (
    KNOWN_CERTIFICATES,
    certificate_report,
    jacobian_spectrum,
    node_bearing_residual,
    report_to_json,
)
from .controllers import ControllerKind
from .geometry import BearingTarget, Formation, PairClass, classify_pair
from .graphs import DirectedGraph
from .sim import SimConfig, StopReason, simulate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIME_LIMIT = 2

_RANDOMIZED = ("nu", "persistence")


class ScenarioError(ValueError):
    """Scenario file did not parse or validate; message carries the path."""


@dataclass(frozen=True, eq=False)
class Scenario:
    """One validated scenario document, ready to run."""
    name: str
    path: str
    kind: ControllerKind
    formation: Formation
    target: Optional[BearingTarget]
    target_formation: Optional[Formation]
    witness: Optional[Formation]
    cfg: SimConfig
    analyses: tuple
    seed: Optional[int]
    description: str


# ------------------------------------------------------------------ loading

def _fail(path, msg):
    raise ScenarioError(f"{path}: {msg}")


def _positions(path, doc, key, graph):
    rows = doc.get(key)
    if key == "positions" and rows is None:
        _fail(path, "missing \"positions\"")
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != graph.n or arr.shape[1] < 1:
        _fail(path, f"\"{key}\" must be {graph.n} rows of equal length")
    if not np.all(np.isfinite(arr)):
        _fail(path, f"\"{key}\" contains non-finite entries")
    return arr


def _parse_graph(path, doc):
    frag = doc.get("graph")
    if not isinstance(frag, dict):
        _fail(path, "missing \"graph\" object")
    try:
        graph = DirectedGraph.from_json(frag)
    except (ValueError, TypeError, KeyError) as exc:
        _fail(path, f"graph: {exc}")
    return graph


def _parse_target(path, doc, graph, d):
    frag = doc.get("target")
    if frag is None:
        return None, None
    if not isinstance(frag, dict):
        _fail(path, "\"target\" must be an object")
    if "positions" in frag:
        pos = _positions(path, frag, "positions", graph)
        if pos.shape[1] != d:
            _fail(path, "target positions have the wrong dimension")
        try:
            shape = Formation.from_positions(graph, pos)
            return BearingTarget.from_formation(shape), shape
        except ValueError as exc:
            _fail(path, f"target: {exc}")
    if "bearings" in frag:
        vectors = {}
        for key, vec in frag["bearings"].items():
            try:
                i, j = (int(s) for s in key.split(","))
            except ValueError:
                _fail(path, f"target bearing key {key!r} is not \"i,j\"")
            vectors[(i, j)] = np.asarray(vec, dtype=float)
        try:
            return BearingTarget.from_vectors(graph, d, vectors), None
        except (ValueError, KeyError) as exc:
            _fail(path, f"target: {exc}")
    _fail(path, "\"target\" needs \"positions\" or \"bearings\"")


def _parse_sim(path, doc, dt=None, t_max=None):
    frag = doc.get("sim", {})
    if not isinstance(frag, dict):
        _fail(path, "\"sim\" must be an object")
    known = {"dt", "t_max", "stop_tol", "eps_c", "merge_clusters", "record_every"}
    extra = set(frag) - known
    if extra:
        _fail(path, f"unknown sim settings: {', '.join(sorted(extra))}")
    merged = dict(frag)
    if dt is not None:
        merged["dt"] = dt
    if t_max is not None:
        merged["t_max"] = t_max
    try:
        return SimConfig(**merged)
    except (ValueError, TypeError) as exc:
        _fail(path, f"sim: {exc}")


def load_scenario(path, dt=None, t_max=None, seed=None):
    """Parse and validate one scenario file.

    dt, t_max and seed override the file when given.  Raises
    ScenarioError with a path-prefixed (and, for JSON syntax problems,
    line-numbered) message; no artifact is written on failure.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        _fail(path, "top level must be a JSON object")

    controller = doc.get("controller")
    if controller not in ("consensus", "formation"):
        _fail(path, "\"controller\" must be \"consensus\" or \"formation\"")
    topology = doc.get("topology", "directed")
    if topology not in ("directed", "undirected"):
        _fail(path, "\"topology\" must be \"directed\" or \"undirected\"")
    kind = ControllerKind.from_flags(controller, topology)

    graph = _parse_graph(path, doc)
    if topology == "undirected":
        graph = graph.symmetrized()

    pos = _positions(path, doc, "positions", graph)
    try:
        formation = Formation.from_positions(graph, pos)
    except ValueError as exc:
        _fail(path, f"positions: {exc}")

    target, target_formation = _parse_target(path, doc, graph, formation.d)
    if kind.is_formation and target is None:
        _fail(path, "formation scenarios need a \"target\"")
    if not kind.is_formation and target is not None:
        _fail(path, "consensus scenarios take no \"target\"")

    witness = None
    if "witness" in doc:
        frag = doc["witness"]
        if not isinstance(frag, dict) or "positions" not in frag:
            _fail(path, "\"witness\" must be an object with \"positions\"")
        wpos = _positions(path, frag, "positions", graph)
        witness = Formation.from_positions(graph, wpos)

    analyses = doc.get("analyses", [])
    if not isinstance(analyses, list):
        _fail(path, "\"analyses\" must be a list of certificate names")
    unknown = [a for a in analyses if a not in KNOWN_CERTIFICATES]
    if unknown:
        _fail(path, f"unknown analyses: {', '.join(map(str, unknown))} "
                    f"(choose from {', '.join(KNOWN_CERTIFICATES)})")

    if seed is None:
        seed = doc.get("seed")
    if seed is not None and not isinstance(seed, int):
        _fail(path, "\"seed\" must be an integer")
    randomized = [a for a in analyses if a in _RANDOMIZED]
    if randomized and seed is None:
        _fail(path, f"analyses {', '.join(randomized)} are randomized; set a \"seed\"")

    cfg = _parse_sim(path, doc, dt=dt, t_max=t_max)
    name = doc.get("name") or Path(path).stem
    return Scenario(name=str(name), path=str(path), kind=kind,
                    formation=formation, target=target,
                    target_formation=target_formation, witness=witness,
                    cfg=cfg, analyses=tuple(analyses), seed=seed,
                    description=str(doc.get("description", "")))


# ------------------------------------------------------------------ running

def _trajectory_json(scenario, traj):
    return {
        "name": scenario.name,
        "controller": scenario.kind.value,
        "n": traj.n,
        "d": traj.d,
        "dt": traj.dt,
        "stop_reason": traj.stop_reason.value,
        "t_converge": traj.t_converge,
        "steps_done": traj.steps_done,
        "times": [float(t) for t in traj.times],
        "states": [[float(v) for v in row] for row in traj.states],
        "phi_tilde": [float(v) for v in traj.phi_tilde],
        "psi": [None if math.isnan(v) else float(v) for v in traj.psi],
        "v_max_dist": [float(v) for v in traj.v_max_dist],
        "grad_norm": [float(v) for v in traj.grad_norm],
        "centroid": [[float(v) for v in row] for row in traj.centroid],
    }


def _write_text(out_dir, filename, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / filename
    target.write_text(text, encoding="utf-8")
    return target


def _certificates_json(scenario, requests):
    report = certificate_report(scenario.formation, requests,
                                target_formation=scenario.target_formation,
                                seed=scenario.seed or 0)
    return report, json.dumps(report_to_json(report), indent=2) + "\n"


def _stop_exit(traj):
    if traj.stop_reason is StopReason.CONVERGED:
        return EXIT_OK
    if traj.stop_reason is StopReason.TIME_LIMIT:
        return EXIT_TIME_LIMIT
    return EXIT_ERROR


def run_simulate(scenario, out_dir, fmt):
    """Integrate one scenario and write its artifacts.

    Returns the exit code for this run.  Artifacts are rendered in memory
    first so a failing run leaves no partial file behind.
    """
    traj = simulate(scenario.formation, scenario.kind, scenario.cfg,
                    target=scenario.target)
    if fmt == "json":
        payload = json.dumps(_trajectory_json(scenario, traj), indent=2) + "\n"
        suffix = ".json"
    else:
        payload = traj.csv_text()
        suffix = ".csv"
    cert_text = None
    if scenario.analyses:
        _, cert_text = _certificates_json(scenario, scenario.analyses)

    written = [_write_text(out_dir, scenario.name + suffix, payload)]
    if cert_text is not None:
        written.append(_write_text(out_dir, scenario.name + ".certificates.json",
                                   cert_text))
    code = _stop_exit(traj)
    where = "t={:.6g}".format(traj.t_converge) if traj.t_converge is not None \
        else f"t_max={scenario.cfg.t_max:.6g}"
    print(f"{scenario.name}: {traj.stop_reason.value} at {where} -> "
          + ", ".join(str(p) for p in written))
    if traj.stop_reason is StopReason.NUMERICAL_FAILURE:
        print(f"{scenario.name}: state left the finite range", file=sys.stderr)
    return code


def run_analyze(scenario, certs, out_dir):
    requests = tuple(certs) if certs else scenario.analyses
    if not requests:
        raise ScenarioError(
            f"{scenario.path}: no certificates requested; pass --cert or "
            "list \"analyses\" in the scenario")
    unknown = [r for r in requests if r not in KNOWN_CERTIFICATES]
    if unknown:
        raise ScenarioError(
            f"{scenario.path}: unknown certificates: {', '.join(unknown)} "
            f"(choose from {', '.join(KNOWN_CERTIFICATES)})")
    randomized = [r for r in requests if r in _RANDOMIZED]
    if randomized and scenario.seed is None:
        raise ScenarioError(
            f"{scenario.path}: certificates {', '.join(randomized)} are "
            "randomized; set a \"seed\" in the scenario or pass --seed")
    report, text = _certificates_json(scenario, requests)
    target = _write_text(out_dir, scenario.name + ".certificates.json", text)
    print(f"{scenario.name}: wrote {target}")
    if report.nu is not None:
        print(f"  nu estimate      {report.nu.value:.9g}  "
              f"(strata searched: {report.nu.strata_searched})")
        print(f"  t reach bound    {report.t_reach_bound:.9g}")
    if report.conjecture is not None:
        c = report.conjecture
        print(f"  cycle bound      {c.bound:.9g}  (l={c.cycle_length:.9g}, "
              f"caption variant {c.caption_variant:.9g})")
    if report.spectrum is not None:
        s = report.spectrum
        print(f"  max Re eig J     {s.max_real_jacobian:+.9g}")
        print(f"  max Re eig -L_B  {s.max_real_minus_laplacian:+.9g}")
    if report.rigidity is not None:
        r = report.rigidity
        print(f"  rigidity         rank {r.rank}/{r.required_rank} "
              f"{'rigid' if r.rigid else 'not rigid'}")
    if report.persistence is not None:
        print(f"  persistence      {report.persistence.status.value} "
              f"({report.persistence.trials} trials)")
    return EXIT_OK


# ------------------------------------------------------------- reproductions

def _bundled(name):
    ref = resources.files("bearing_flows") / "scenarios" / f"{name}.json"
    with resources.as_file(ref) as concrete:
        return load_scenario(str(concrete))


def _repro_counterexample(out_dir):
    """Spectrum check of the directed formation whose target is unstable."""
    scenario = _bundled("counterexample")
    spec = jacobian_spectrum(scenario.target_formation)
    _, text = _certificates_json(scenario, ("spectrum", "rigidity"))
    target = _write_text(out_dir, "counterexample.certificates.json", text)
    print(f"max Re eig(J_dir) = {spec.max_real_jacobian:+.12g}")
    print(f"max Re eig(-L_B)  = {spec.max_real_minus_laplacian:+.12g}")
    print(f"wrote {target}")
    ok = spec.max_real_jacobian > 1e-8 and spec.max_real_minus_laplacian > 1e-8
    print("PASS: both real parts positive" if ok
          else "FAIL: expected positive real parts")
    return EXIT_OK if ok else EXIT_ERROR


def _repro_consensus_comparison(out_dir):
    """Directed versus undirected bearing consensus on one 7-node graph."""
    scenario = _bundled("consensus_comparison")
    runs = (
        ("directed", scenario.formation, ControllerKind.CONSENSUS_DIRECTED),
        ("undirected",
         Formation(scenario.formation.graph.symmetrized(),
                   scenario.formation.d, scenario.formation.x.copy()),
         ControllerKind.CONSENSUS_UNDIRECTED),
    )
    ok = True
    for label, formation, kind in runs:
        traj = simulate(formation, kind, scenario.cfg)
        target = out_dir / f"consensus_comparison.{label}.csv"
        out_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(target)
        converged = traj.stop_reason is StopReason.CONVERGED
        ok = ok and converged
        where = f"t={traj.t_converge:.4f}" if converged else "no convergence"
        print(f"{label}: {where}, final V = {traj.v_max_dist[-1]:.3e} -> {target}")
    print("PASS: both runs converged" if ok else "FAIL: a run did not converge")
    return EXIT_OK if ok else EXIT_ERROR


def _repro_formation_comparison(out_dir):
    """Three formation flows into one target shape; psi must die out."""
    names = ("formation_undirected", "formation_directed", "formation_cycle")
    ok = True
    for name in names:
        scenario = _bundled(name)
        traj = simulate(scenario.formation, scenario.kind, scenario.cfg,
                        target=scenario.target)
        target = out_dir / f"{name}.csv"
        out_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(target)
        psi_end = float(traj.psi[-1])
        ok = ok and psi_end < 0.05
        print(f"{scenario.name}: psi({traj.times[-1]:.1f}) = {psi_end:.6f} "
              f"(started {float(traj.psi[0]):.3f}) -> {target}")
    print("PASS: all final psi below 0.05" if ok
          else "FAIL: a run kept psi above 0.05")
    return EXIT_OK if ok else EXIT_ERROR


def _repro_persistence_pair(out_dir):
    """Validate the bundled equal-bearing-sum pair of distinct formations."""
    scenario = _bundled("persistence_pair")
    residual = node_bearing_residual(scenario.witness, scenario.target)
    verdict = classify_pair(scenario.witness, scenario.target_formation)
    distinct = verdict is PairClass.DISTINCT
    payload = json.dumps({
        "residual": residual,
        "pair_class": verdict.value,
        "target": scenario.target_formation.to_json(),
        "witness": scenario.witness.to_json(),
    }, indent=2) + "\n"
    target = _write_text(out_dir, "persistence_pair.json", payload)
    print(f"node bearing-sum residual = {residual:.6f}")
    print(f"pair classification       = {verdict.value}")
    print(f"wrote {target}")
    ok = residual < 1e-2 and distinct
    print("PASS: witness confirmed" if ok else "FAIL: witness does not validate")
    return EXIT_OK if ok else EXIT_ERROR


REPRODUCTIONS = {
    "counterexample": _repro_counterexample,
    "consensus-comparison": _repro_consensus_comparison,
    "formation-comparison": _repro_formation_comparison,
    "persistence-pair": _repro_persistence_pair,
}


# ---------------------------------------------------------------- interface

def _thread_cap():
    raw = os.environ.get("BEARING_FLOWS_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ScenarioError(f"BEARING_FLOWS_THREADS={raw!r} is not an integer")
    if cap < 1:
        raise ScenarioError("BEARING_FLOWS_THREADS must be at least 1")
    return cap


def _cmd_simulate(args):
    scenarios = [load_scenario(p, dt=args.dt, t_max=args.tmax, seed=args.seed)
                 for p in args.scenario]
    out_dir = Path(args.out)
    if len(scenarios) == 1:
        return run_simulate(scenarios[0], out_dir, args.format)
    # One worker per scenario; artifacts are per-scenario files, so the
    # only shared state is the output directory itself.
    with ThreadPoolExecutor(max_workers=min(_thread_cap(), len(scenarios))) as pool:
        codes = list(pool.map(
            lambda s: run_simulate(s, out_dir, args.format), scenarios))
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_TIME_LIMIT if EXIT_TIME_LIMIT in codes else EXIT_OK


def _cmd_analyze(args):
    scenario = load_scenario(args.scenario, dt=args.dt, t_max=args.tmax,
                             seed=args.seed)
    certs = None
    if args.cert:
        certs = tuple(s.strip() for s in args.cert.split(",") if s.strip())
    return run_analyze(scenario, certs, Path(args.out))


def _cmd_reproduce(args):
    handler = REPRODUCTIONS.get(args.name)
    if handler is None:
        known = ", ".join(sorted(REPRODUCTIONS))
        print(f"unknown reproduction {args.name!r} (choose from {known})",
              file=sys.stderr)
        return EXIT_ERROR
    return handler(Path(args.out))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bearing-flows",
        description="Bearing-only consensus and formation flows: "
                    "simulation and certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dt", type=float, default=None,
                       help="override the scenario step size")
        p.add_argument("--tmax", type=float, default=None,
                       help="override the scenario time horizon")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default=".", metavar="DIR",
                       help="directory for artifacts (default: .)")

    sim = sub.add_parser("simulate", help="integrate one or more scenarios")
    sim.add_argument("scenario", nargs="+", help="scenario JSON file(s)")
    common(sim)
    sim.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="trajectory artifact format (default: csv)")
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="run certificates for a scenario")
    ana.add_argument("scenario", help="scenario JSON file")
    common(ana)
    ana.add_argument("--cert", default=None, metavar="NAMES",
                     help="comma-separated certificates "
                          f"({', '.join(KNOWN_CERTIFICATES)})")
    ana.set_defaults(func=_cmd_analyze)

    rep = sub.add_parser("reproduce", help="rerun a bundled experiment")
    rep.add_argument("name", help="one of: " + ", ".join(sorted(REPRODUCTIONS)))
    rep.add_argument("--out", default=".", metavar="DIR",
                     help="directory for artifacts (default: .)")
    rep.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
