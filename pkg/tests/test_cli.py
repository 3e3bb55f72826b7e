import csv

import pytest

from nsfsim.cli import build_parser, main
from nsfsim.io import read_snapshot

SMALL = ["--set", "nx=16", "--set", "ny=16", "--set", "dt=2e-3", "--set", "snapshot_every=5"]


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_zero_length_run(tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--out", str(out), *SMALL, "--set", "t_end=0"]) == 0
    assert [p.name for p in (out / "snapshots").iterdir()] == ["snap_0000000.nsf"]
    led = rows(out / "ledger.csv")
    assert len(led) == 2 and led[0][0] == "time"
    assert len(rows(out / "steps.csv")) == 1
    assert read_snapshot(out / "snapshots" / "snap_0000000.nsf").time == 0.0
    assert "# theta_min_effective = 10.0" in (out / "manifest.txt").read_text()


def test_deterministic_rerun_is_identical(tmp_path):
    args = ["run", "--deterministic", *SMALL, "--set", "t_end=0.02"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("ledger.csv", "steps.csv", "snapshots/snap_0000010.nsf"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_resume_matches_uninterrupted(tmp_path):
    full, part = tmp_path / "full", tmp_path / "part"
    assert main(["run", "--deterministic", *SMALL, "--set", "t_end=0.04", "--out", str(full)]) == 0
    assert main(["run", "--deterministic", *SMALL, "--set", "t_end=0.02", "--out", str(part)]) == 0
    assert main(["resume", str(part / "snapshots" / "snap_0000010.nsf"), "--deterministic", "--set", "t_end=0.04"]) == 0
    for name in ("ledger.csv", "steps.csv", "snapshots/snap_0000020.nsf"):
        assert (full / name).read_bytes() == (part / name).read_bytes(), name


def test_resume_without_steps_reproduces_snapshot(tmp_path):
    out = tmp_path / "r"
    assert main(["run", *SMALL, "--set", "t_end=0.01", "--out", str(out)]) == 0
    snap = out / "snapshots" / "snap_0000005.nsf"
    before = snap.read_bytes()
    assert main(["resume", str(snap)]) == 0
    assert snap.read_bytes() == before


def test_resume_errors(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", *SMALL, "--set", "t_end=0", "--out", str(out)]) == 0
    snap = out / "snapshots" / "snap_0000000.nsf"
    bad = out / "snapshots" / "bad.nsf"
    bad.write_bytes(b"JUNK" + snap.read_bytes()[4:])
    assert main(["resume", str(bad)]) == 2
    assert "magic" in capsys.readouterr().err
    assert main(["resume", str(snap), "--set", "nx=32"]) == 2
    lonely = tmp_path / "x" / "snapshots"
    lonely.mkdir(parents=True)
    (lonely / "s.nsf").write_bytes(snap.read_bytes())
    assert main(["resume", str(lonely / "s.nsf")]) == 2


def test_config_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nx = 16\nfoo = 1\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_step_rejection_exit_code(tmp_path):
    assert (
        main(
            [
                "run",
                *SMALL,
                "--set",
                "vel_amp=1000",
                "--set",
                "dt_floor_factor=2",
                "--set",
                "t_end=0.01",
                "--out",
                str(tmp_path / "r"),
            ]
        )
        == 3
    )


def test_unknown_experiment():
    with pytest.raises(SystemExit) as err:
        build_parser().parse_args(["experiment", "nonsense"])
    assert err.value.code == 2


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("NSFSIM_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", *SMALL, "--set", "t_end=0"]) == 0
    assert (tmp_path / "run-pudding" / "ledger.csv").exists()


def test_smallness_experiment(tmp_path, capsys):
    assert main(["experiment", "smallness", "--set", "nx=16", "--set", "ny=16", "--out", str(tmp_path)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert len(rows(tmp_path / "smallness.csv")) == 4
