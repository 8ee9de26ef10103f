import json
import os
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest

from bearing_flows import cli

LOCAL = Path(__file__).parent / "scenarios"


def bundled_path(name):
    return Path(str(resources.files("bearing_flows") / "scenarios" / f"{name}.json"))


def run_cli(args):
    return cli.main([str(a) for a in args])


# The pinned contract: exit 0 when the flow converged, 2 at the time
# limit, 1 on any scenario error.  One entry per regression scenario.
REGRESSION = [
    (bundled_path("counterexample"), 0),
    (bundled_path("consensus_comparison"), 0),
    (bundled_path("formation_undirected"), 2),
    (bundled_path("formation_directed"), 2),
    (bundled_path("formation_cycle"), 2),
    (bundled_path("persistence_pair"), 2),
    (LOCAL / "two_body.json", 0),
    (LOCAL / "square_pursuit_short.json", 2),
    (LOCAL / "malformed.json", 1),
    (LOCAL / "bad_edge.json", 1),
    (LOCAL / "missing_target.json", 1),
    (LOCAL / "bad_cert.json", 1),
]


@pytest.mark.parametrize("path,expected", REGRESSION,
                         ids=[p.stem for p, _ in REGRESSION])
def test_regression_exit_codes(tmp_path, path, expected):
    code = run_cli(["simulate", path, "--out", tmp_path / "art"])
    assert code == expected


def test_simulate_writes_csv_artifact(tmp_path):
    code = run_cli(["simulate", LOCAL / "two_body.json", "--out", tmp_path])
    assert code == 0
    text = (tmp_path / "two_body.csv").read_text()
    header = text.splitlines()[0]
    assert header == "t,x_1_1,x_1_2,x_2_1,x_2_2,phi_tilde,psi,V,grad_norm,cx_1,cx_2"


def test_simulate_json_artifact_round_trips(tmp_path):
    code = run_cli(["simulate", LOCAL / "two_body.json", "--out", tmp_path,
                    "--format", "json"])
    assert code == 0
    doc = json.loads((tmp_path / "two_body.json").read_text())
    assert doc["controller"] == "consensus-undirected"
    assert doc["stop_reason"] == "converged"
    assert abs(doc["t_converge"] - 1.0) <= 0.01
    assert len(doc["times"]) == len(doc["states"]) == len(doc["phi_tilde"])


def test_failed_parse_leaves_no_outputs(tmp_path):
    out = tmp_path / "art"
    code = run_cli(["simulate", LOCAL / "malformed.json", "--out", out])
    assert code == 1
    assert not out.exists()


def test_parse_error_message_has_line_and_column(tmp_path, capsys):
    run_cli(["simulate", LOCAL / "malformed.json", "--out", tmp_path])
    err = capsys.readouterr().err
    # path:line:col prefix, pointing into the file
    assert "malformed.json:4:3:" in err


def test_flag_overrides_cut_the_horizon(tmp_path):
    code = run_cli(["simulate", LOCAL / "two_body.json", "--out", tmp_path,
                    "--tmax", "0.25"])
    assert code == 2


def test_batch_runs_and_reduces_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setenv("BEARING_FLOWS_THREADS", "2")
    code = run_cli(["simulate", LOCAL / "two_body.json",
                    LOCAL / "square_pursuit_short.json", "--out", tmp_path])
    assert code == 2
    assert (tmp_path / "two_body.csv").exists()
    assert (tmp_path / "square_pursuit_short.csv").exists()


def test_batch_error_wins_over_time_limit(tmp_path, monkeypatch):
    monkeypatch.setenv("BEARING_FLOWS_THREADS", "1")
    code = run_cli(["simulate", LOCAL / "square_pursuit_short.json",
                    LOCAL / "bad_edge.json", "--out", tmp_path])
    assert code == 1


def test_bad_thread_cap_is_an_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BEARING_FLOWS_THREADS", "many")
    code = run_cli(["simulate", LOCAL / "two_body.json",
                    LOCAL / "square_pursuit_short.json", "--out", tmp_path])
    assert code == 1
    assert "BEARING_FLOWS_THREADS" in capsys.readouterr().err


def test_csv_artifacts_byte_identical_across_processes(tmp_path):
    env = dict(os.environ)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        proc = subprocess.run(
            [sys.executable, "-m", "bearing_flows.cli", "simulate",
             str(bundled_path("consensus_comparison")), "--out", str(out)],
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "consensus_comparison.csv").read_bytes())
    assert outs[0] == outs[1]


def test_analyze_writes_certificate_report(tmp_path):
    code = run_cli(["analyze", bundled_path("counterexample"),
                    "--out", tmp_path, "--cert", "spectrum,rigidity"])
    assert code == 0
    doc = json.loads((tmp_path / "counterexample.certificates.json").read_text())
    assert doc["spectrum"]["max_real_jacobian"] > 1e-8
    assert doc["spectrum"]["max_real_minus_laplacian"] > 1e-8
    assert doc["rigidity"]["rank"] == 5


def test_analyze_randomized_certificate_requires_seed(tmp_path, capsys):
    code = run_cli(["analyze", LOCAL / "two_body.json",
                    "--out", tmp_path, "--cert", "nu"])
    assert code == 1
    assert "seed" in capsys.readouterr().err


def test_analyze_unknown_certificate_fails(tmp_path, capsys):
    code = run_cli(["analyze", LOCAL / "two_body.json",
                    "--out", tmp_path, "--cert", "frobnication", "--seed", "0"])
    assert code == 1
    assert "frobnication" in capsys.readouterr().err


def test_analyze_persistence_finds_the_bundled_witness(tmp_path):
    code = run_cli(["analyze", bundled_path("persistence_pair"),
                    "--out", tmp_path])
    assert code == 0
    doc = json.loads((tmp_path / "persistence_pair.certificates.json").read_text())
    assert doc["persistence"]["status"] == "non-persistent-witness"


@pytest.mark.parametrize("name", sorted(cli.REPRODUCTIONS))
def test_reproductions_pass(tmp_path, name):
    code = run_cli(["reproduce", name, "--out", tmp_path])
    assert code == 0
    assert any(tmp_path.iterdir())


def test_reproduce_unknown_name(tmp_path, capsys):
    code = run_cli(["reproduce", "renormalization", "--out", tmp_path])
    assert code == 1
    assert "renormalization" in capsys.readouterr().err


def test_reproduce_prints_pass_verdicts(tmp_path, capsys):
    run_cli(["reproduce", "counterexample", "--out", tmp_path])
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "max Re eig(J_dir)" in out


def test_scenario_seed_required_before_running(tmp_path, capsys):
    # randomized analyses listed in the scenario itself need a seed too
    doc = json.loads((LOCAL / "two_body.json").read_text())
    doc["analyses"] = ["persistence"]
    path = tmp_path / "needs_seed.json"
    path.write_text(json.dumps(doc))
    code = run_cli(["simulate", path, "--out", tmp_path / "art"])
    assert code == 1
    assert "seed" in capsys.readouterr().err
    assert not (tmp_path / "art").exists()
