"""Command line: ``nsfsim run | resume | experiment``.

Exit status: 0 success, 1 experiment checks failed, 2 configuration or
input error, 3 step rejected below the dt floor, 4 output error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .diagnostics import write_csv
from .experiments import EXPERIMENTS, RECIPE_DEFAULTS, initial_state, run_experiment, simulate
from .io import (
    ConfigError,
    RunConfig,
    SnapshotError,
    load_config,
    parse_config,
    parse_overrides,
    read_snapshot,
    write_manifest,
    write_snapshot,
)
from .picard import StepRejected
from .runner import LEDGER_COLUMNS
from .state import MaterialLaw

ENV_OUTPUT_ROOT = "NSFSIM_OUTPUT_ROOT"
log = logging.getLogger("nsfsim")

STEP_COLUMNS = (
    "time",
    "dt",
    "sweeps",
    "substeps",
    "certificate",
    "heat_input",
    "viscous_loss",
    "kinetic",
    "vel_l2",
    "thermal",
    "mass",
    "min_theta",
    "rho_dev",
    "max_div",
)


def _output_dir(args, cfg: RunConfig, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(ENV_OUTPUT_ROOT, "runs")) / default_name


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _config(args, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    cfg = parse_config(_read_text(args.config), base) if args.config else base
    over = parse_overrides(args.set or [])
    if args.deterministic:
        over["deterministic"] = True
    return cfg.replace(**over) if over else cfg


@contextlib.contextmanager
def _threads(cfg: RunConfig, workers: int | None):
    """Cap BLAS/OpenMP threads; deterministic mode forces one."""
    n = 1 if cfg.deterministic else workers
    if n is None:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


def _snapshot_name(step: int) -> str:
    return f"snap_{step:07d}.nsf"


def _step_rows(res):
    return [tuple(getattr(r, c) for c in STEP_COLUMNS) for r in res.steps]


def _read_rows(path: Path, keep_until: float) -> list[list[str]]:
    if not path.exists():
        return []
    with path.open() as fh:
        rows = list(csv.reader(fh))[1:]
    return [r for r in rows if float(r[0]) <= keep_until * (1 + 1e-12) + 1e-300]


def _integrate_to_dir(cfg: RunConfig, s0, law, out: Path, *, resume_from: float | None = None) -> int:
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)

    def on_snapshot(state, row, step):
        write_snapshot(snap_dir / _snapshot_name(step), state)

    t0 = time.perf_counter()
    res = simulate(cfg, s0, law, keep_snapshots=False, on_snapshot=on_snapshot)
    wall = time.perf_counter() - t0
    ledger_rows, step_rows = res.ledger_rows, _step_rows(res)
    if resume_from is not None:
        # the snapshot row is already on disk; later rows belong to the interrupted run
        old_l = _read_rows(out / "ledger.csv", resume_from)
        old_s = _read_rows(out / "steps.csv", resume_from)
        if old_l:
            ledger_rows = [tuple(r) for r in old_l] + ledger_rows[1:]
        step_rows = [tuple(r) for r in old_s] + step_rows
    write_csv(out / "ledger.csv", LEDGER_COLUMNS, ledger_rows)
    write_csv(out / "steps.csv", STEP_COLUMNS, step_rows)
    write_manifest(out / "manifest.txt", cfg, __version__, wall, {"theta_min_effective": repr(law.theta_min)})
    log.info("run finished at t=%g after %d steps in %.1f s; output in %s", res.final.time, len(res.steps), wall, out)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _output_dir(args, cfg, f"run-{cfg.scenario}")
    s0, law = initial_state(cfg)
    with _threads(cfg, args.workers):
        return _integrate_to_dir(cfg, s0, law, out)


def _effective_theta_min(manifest: Path, default: float) -> float:
    """theta_min fixed from the initial data of the original run, if recorded."""
    if manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.startswith("# theta_min_effective ="):
                return float(line.split("=", 1)[1])
    return default


def cmd_resume(args) -> int:
    snap_path = Path(args.snapshot)
    s = read_snapshot(snap_path)
    run_dir = snap_path.resolve().parent.parent
    if args.config:
        base = RunConfig()
    else:
        manifest = run_dir / "manifest.txt"
        if not manifest.exists():
            raise ConfigError(f"no --config given and no manifest at {manifest}")
        base = load_config(manifest)
        args.config = None
    cfg = _config(args, base)
    g, cg = s.grid, cfg.grid
    if (g.nx, g.ny) != (cg.nx, cg.ny) or abs(g.lx - cg.lx) > 1e-12 * cg.lx or abs(g.ly - cg.ly) > 1e-12 * cg.ly:
        raise ConfigError(f"snapshot grid {g} is incompatible with configured grid {cg}")
    out = Path(args.out) if args.out else run_dir
    law = MaterialLaw(cfg.m, cfg.l, _effective_theta_min(run_dir / "manifest.txt", cfg.theta_min))
    with _threads(cfg, args.workers):
        return _integrate_to_dir(cfg, s, law, out, resume_from=s.time)


def cmd_experiment(args) -> int:
    name = args.name
    cfg = _config(args, RunConfig().replace(**RECIPE_DEFAULTS.get(name, {})))
    out = _output_dir(args, cfg, f"experiment-{name}")
    with _threads(cfg, args.workers):
        res = run_experiment(name, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{name}.csv", res.header, res.rows)
    (out / f"{name}_summary.txt").write_text(res.summary())
    write_manifest(out / "manifest.txt", cfg, __version__, 0.0, {"experiment": name})
    print(res.summary(), end="")
    return 0 if res.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${ENV_OUTPUT_ROOT}/<name> or ./runs/<name>)")
    common.add_argument("--workers", type=int, metavar="N", help="thread count for BLAS/OpenMP kernels")
    common.add_argument("--deterministic", action="store_true", help="single-threaded, fixed-order reductions")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nsfsim", description="Heat-conducting variable-density viscous flow in a box.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="integrate a configured scenario")
    r = sub.add_parser("resume", parents=[common], help="continue a run from a snapshot")
    r.add_argument("snapshot", help="path to a .nsf snapshot")
    e = sub.add_parser("experiment", parents=[common], help="run a named experiment recipe")
    e.add_argument("name", choices=EXPERIMENTS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "resume": cmd_resume, "experiment": cmd_experiment}
    try:
        return handlers[args.command](args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StepRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
