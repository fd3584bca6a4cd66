"""End-to-end command-line checks: exit codes, config validation,
deterministic artifacts, and the run manifest."""

import hashlib
import json
import math
import os

import pytest

from zkrect.cli import main

DESK = ["--nx", "24", "--modes", "6", "--T", "0.5", "--dt", "0.005"]
# The steering runs get a longer horizon: T = 0.5 on the coarse desk grid
# leaves terminal content the wall trace can barely reach, and conjugate
# gradients may stall right at the default tolerance depending on the seed.
STEER = ["--nx", "24", "--modes", "6", "--T", "1", "--dt", "0.005"]


def _cfg_file(tmp_path, name="cfg.json", **fields):
    path = tmp_path / name
    path.write_text(json.dumps(fields))
    return str(path)


def test_roots_worked_pair(tmp_path, capsys):
    code = main(["roots", "--theta", "1", "--a", "0",
                 "--out", str(tmp_path / "o")])
    out = capsys.readouterr().out
    assert code == 0
    summary = json.loads(out)
    got = sorted([complex(summary["r1"]["re"], summary["r1"]["im"]),
                  complex(summary["r2"]["re"], summary["r2"]["im"])],
                 key=lambda z: z.real)
    assert abs(got[0] - 1j) < 1e-12
    assert abs(got[1] - complex(math.sqrt(3) / 2, -0.5)) < 1e-12
    assert summary["residual_r1"] < 1e-12
    assert (tmp_path / "o" / "summary.json").exists()


def test_no_subcommand_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1


def test_bad_flag_value(capsys):
    assert main(["roots", "--theta", "one", "--a", "0"]) == 1


def test_missing_config_file(tmp_path, capsys):
    code = main(["spectrum", "--config", str(tmp_path / "nope.json")])
    assert code == 1
    assert "error" in capsys.readouterr().err.lower()


def test_malformed_config_rejected(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["spectrum", "--config", str(path)]) == 1


def test_config_problems_all_enumerated(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, R=-1.0, L=0.0, T=-0.5)
    assert main(["spectrum", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "R:" in err and "L:" in err and "T:" in err


def test_unknown_config_field_rejected(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, R=2.0, bogus=1)
    assert main(["spectrum", "--config", cfg]) == 1
    assert "bogus" in capsys.readouterr().err


def test_thread_env_var_validated(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ZKRECT_THREADS", "many")
    assert main(["spectrum", "--out", str(tmp_path)]) == 1
    monkeypatch.setenv("ZKRECT_THREADS", "1")
    assert main(["spectrum", "--out", str(tmp_path)]) == 0


def test_spectrum_desk_run(tmp_path, capsys):
    out = tmp_path / "spec"
    code = main(["spectrum", "--out", str(out), "--modes", "6"])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["resonant_count"] == 0
    assert (out / "spectrum.csv").exists()
    assert (out / "critical.csv").exists()


def test_spectrum_flags_resonant_domain(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, R=2 * math.pi, b=1.0, case="b")
    code = main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")])
    summary = json.loads(capsys.readouterr().out)
    assert code == 2
    assert summary["resonant_count"] > 0


def test_simulate_desk_run_writes_energy_ledger(tmp_path, capsys):
    out = tmp_path / "sim"
    code = main(["simulate", "--out", str(out)] + DESK)
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["exact_ledger"] is True
    assert summary["ledger_residual"] < 1e-10
    header = (out / "energy.csv").read_text().splitlines()[0]
    assert header == "t,energy"
    assert (out / "wall_traces.csv").exists()


def test_decay_verify_reports_worked_constants(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, R=math.pi, L=math.pi, b=0.0)
    code = main(["decay-verify", "--config", cfg, "--out",
                 str(tmp_path / "o")] + DESK)
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["kappa"] == pytest.approx(2.0, abs=1e-12)
    assert summary["epsilon0"] == pytest.approx(3.0 ** 1.75 / 8.0, abs=1e-12)
    assert summary["bound_satisfied"] is True
    assert (tmp_path / "o" / "decay.csv").exists()


def test_decay_verify_inadmissible_exits_two(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, R=math.pi, L=math.pi, b=10.0)
    code = main(["decay-verify", "--config", cfg, "--out",
                 str(tmp_path / "o")] + DESK)
    summary = json.loads(capsys.readouterr().out)
    assert code == 2
    assert summary["hypothesis_problems"]


def test_control_desk_run_and_determinism(tmp_path, capsys):
    args = ["control", "--seed", "3"] + STEER
    code = main(args + ["--out", str(tmp_path / "a")])
    out_a = capsys.readouterr().out
    assert code == 0
    assert json.loads(out_a)["terminal_error"] < 1e-2
    code = main(args + ["--out", str(tmp_path / "b")])
    out_b = capsys.readouterr().out
    assert code == 0
    assert out_a == out_b
    for name in ("nu1.csv", "cg_trace.csv", "summary.json"):
        pa = (tmp_path / "a" / name).read_bytes()
        pb = (tmp_path / "b" / name).read_bytes()
        assert pa == pb


def test_manifest_hashes_match_artifacts(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["simulate", "--out", str(out)] + DESK) == 0
    capsys.readouterr()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["outputs"]
    for name, digest in manifest["outputs"].items():
        payload = (out / name).read_bytes()
        assert hashlib.sha256(payload).hexdigest() == digest
    assert manifest["finished"] >= manifest["started"]


def test_potentials_desk_run(tmp_path, capsys):
    out = tmp_path / "p"
    code = main(["potentials", "--out", str(out), "--T", "2"])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["reconstruction_error"] < 1e-3
    assert (out / "wall_reconstruction.csv").exists()


def test_check_inequalities_desk_run(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, samples=15)
    out = tmp_path / "ineq"
    code = main(["check-inequalities", "--config", cfg, "--out", str(out)]
                + DESK)
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["problems"] == []
    assert (out / "inequality_ratios.csv").exists()


def test_seed_changes_sampled_artifacts(tmp_path, capsys):
    a = main(["control", "--seed", "1", "--out", str(tmp_path / "s1")] + STEER)
    out1 = capsys.readouterr().out
    b = main(["control", "--seed", "2", "--out", str(tmp_path / "s2")] + STEER)
    out2 = capsys.readouterr().out
    assert a == b == 0
    assert out1 != out2
