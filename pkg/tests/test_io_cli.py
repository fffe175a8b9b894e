"""Result files and the command-line front end.

Exit-code contract: 0 success, 2 validation, 3 runtime. File contract:
atomic writes, embedded manifest, byte-identical reruns.
"""

import json
import os

import pytest

from spindual import io as sio
from spindual.cli import RunConfig, main, parse_config, validate, ConfigError
from spindual.experiments import StudyResult


def _result(rows=((1.0, 2), (3.5, -1))):
    return StudyResult(name="probe", params={"a": 1}, columns=("x", "k"),
                       rows=tuple(tuple(r) for r in rows), seed=9,
                       wallclock_s=0.1)


# emission --------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    p = tmp_path / "r.csv"
    sio.emit_results(_result(), str(p))
    manifest, columns, rows = sio.read_result(str(p))
    assert manifest["study"] == "probe" and manifest["seed"] == 9
    assert columns == ["x", "k"]
    assert rows == [[1.0, 2], [3.5, -1]]


def test_json_round_trip(tmp_path):
    p = tmp_path / "r.json"
    sio.emit_results(_result(), str(p), fmt="json")
    manifest, columns, rows = sio.read_result(str(p))
    assert manifest["params"] == {"a": 1}
    assert rows == [[1.0, 2], [3.5, -1]]


def test_empty_result_gives_header_only_csv(tmp_path):
    p = tmp_path / "empty.csv"
    sio.emit_results(_result(rows=()), str(p))
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1] == "x,k"
    assert len(lines) == 2


def test_identical_runs_emit_identical_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    sio.emit_results(_result(), str(a))
    sio.emit_results(_result(), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError, match="format"):
        sio.emit_results(_result(), str(tmp_path / "x.yaml"), fmt="yaml")


def test_failed_write_leaves_no_partial_file(tmp_path, monkeypatch):
    p = tmp_path / "out.csv"

    def boom(src, dst):
        raise OSError("disk gone")

    monkeypatch.setattr(sio.os, "replace", boom)
    with pytest.raises(OSError):
        sio.emit_results(_result(), str(p))
    assert not p.exists()
    assert list(tmp_path.iterdir()) == []  # temp file cleaned up


def test_read_rejects_files_without_manifest(tmp_path):
    p = tmp_path / "naked.csv"
    p.write_text("x,k\n1,2\n")
    with pytest.raises(ValueError, match="manifest"):
        sio.read_result(str(p))


# config resolution -----------------------------------------------------------------

def test_parse_fills_seed_and_threads():
    cfg = parse_config(["simulate", "--alpha", "0.3", "--sites", "12",
                        "--t-end", "1.0"])
    assert cfg.command == "simulate"
    assert isinstance(cfg.params["seed"], int)
    assert cfg.params["threads"] >= 1


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("SPINDUAL_THREADS", "3")
    cfg = parse_config(["simulate", "--t-end", "1.0"])
    assert cfg.params["threads"] == 3


def test_config_file_supplies_defaults(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"alpha": 0.25, "sites": 31}))
    cfg = parse_config(["simulate", "--config", str(f), "--t-end", "2.0"])
    assert cfg.params["alpha"] == 0.25 and cfg.params["sites"] == 31


def test_flags_override_config_file(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"alpha": 0.25}))
    cfg = parse_config(["simulate", "--config", str(f), "--alpha", "0.4",
                        "--t-end", "2.0"])
    assert cfg.params["alpha"] == 0.4


def test_unknown_config_key_is_an_error(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"alpa": 0.25}))
    with pytest.raises(ConfigError, match="alpa"):
        parse_config(["simulate", "--config", str(f)])


def test_config_without_subcommand_is_an_error(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{}")
    with pytest.raises(ConfigError, match="subcommand"):
        parse_config(["--config", str(f)])


def test_malformed_config_is_an_error(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{not json")
    with pytest.raises(ConfigError, match="not JSON"):
        parse_config(["simulate", "--config", str(f)])


def test_validate_names_field_and_range():
    cfg = RunConfig("simulate", {"alpha": 1.5})
    with pytest.raises(ConfigError, match=r"alpha=1.5 invalid; legal range"):
        validate(cfg)


def test_validate_rejects_oversized_duality_grid():
    cfg = RunConfig("duality", {"alpha": 0.5, "sites": 11, "t": 1.0,
                                "model": "rebellious"})
    with pytest.raises(ConfigError, match="sites"):
        validate(cfg)


def test_run_config_normalizes_params():
    a = RunConfig("simulate", {"alpha": 0.5, "sites": 10})
    b = RunConfig("simulate", {"sites": 10, "alpha": 0.5})
    assert a == b


# the command front end ---------------------------------------------------------------

def test_simulate_writes_csv_with_header(tmp_path):
    out = tmp_path / "traj.csv"
    rc = main(["simulate", "--model", "rebellious", "--alpha", "0.3",
               "--sites", "201", "--t-end", "1000", "--seed", "42",
               "--out", str(out)])
    assert rc == 0
    manifest, columns, rows = sio.read_result(str(out))
    assert columns[0] == "t" and len(rows) > 0
    assert manifest["command"] == "simulate"


def test_duality_prints_max_gap(capsys):
    rc = main(["duality", "--sites", "5", "--alpha", "0.5", "--t", "1.0",
               "--seed", "1"])
    assert rc == 0
    outp = capsys.readouterr().out
    assert "max duality gap" in outp


def test_invalid_alpha_exits_2(capsys):
    rc = main(["simulate", "--alpha", "1.5", "--t-end", "1.0"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "alpha=1.5" in err and "legal range" in err


def test_unknown_subcommand_exits_2(capsys):
    assert main(["explode"]) == 2


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert main(["simulate", "--help"]) == 0


def test_unwritable_output_exits_3(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    out = blocker / "x.csv"  # parent is a file: mkstemp must fail
    rc = main(["duality", "--sites", "5", "--alpha", "0.5", "--t", "0.5",
               "--seed", "1", "--out", str(out)])
    assert rc == 3
    assert "spindual:" in capsys.readouterr().err


def test_out_dir_env_prefixes_relative_paths(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SPINDUAL_OUT_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    rc = main(["duality", "--sites", "5", "--alpha", "0.5", "--t", "0.5",
               "--seed", "1", "--out", "gap.csv", "--format", "json"])
    assert rc == 0
    assert (tmp_path / "gap.csv").exists()


def test_manifest_reconstructs_the_run_config(tmp_path):
    out = tmp_path / "gap.json"
    argv = ["duality", "--sites", "5", "--alpha", "0.5", "--t", "0.5",
            "--seed", "7", "--out", str(out), "--format", "json"]
    assert main(argv) == 0
    manifest, _, _ = sio.read_result(str(out))
    rebuilt = RunConfig.from_manifest(manifest)
    cfg = parse_config(argv)
    assert rebuilt == RunConfig(cfg.command, cfg.manifest_config())
    validate(rebuilt)  # a rebuilt config is immediately runnable


def test_identical_seeds_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["survival", "--mode", "scan", "--alpha-grid", "0.1,0.8",
            "--t-end", "50", "--replicas", "30", "--seed", "13"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_dual_and_percolation_commands_run(tmp_path):
    out = tmp_path / "y.csv"
    rc = main(["dual", "--model", "adbarw", "--alpha", "0.3", "--y", "0,1",
               "--t-end", "2.0", "--seed", "5", "--out", str(out)])
    assert rc == 0
    _, columns, rows = sio.read_result(str(out))
    assert "particles" in columns

    out2 = tmp_path / "perc.csv"
    rc = main(["percolation", "--mode", "survival", "--p-grid", "0.6,0.9",
               "--levels", "6", "--replicas", "50", "--seed", "5",
               "--out", str(out2)])
    assert rc == 0
    _, columns2, rows2 = sio.read_result(str(out2))
    assert len(rows2) == 2 and "survival" in columns2


def test_audit_drift_command_runs(capsys):
    rc = main(["audit", "--kind", "drift", "--samples", "500", "--seed", "3"])
    assert rc == 0
    assert "drift_audit" in capsys.readouterr().out
