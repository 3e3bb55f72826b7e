"""Run configuration, binary snapshots and run manifests.

Config files are flat ``key = value`` text with ``#`` comments.  Snapshots
are little-endian binary::

    b"NSF1"  u32 nx  u32 ny  f64 lx  f64 ly  f64 time
    rho (nx, ny)  u (nx+1, ny)  v (nx, ny+1)  theta (nx, ny)  pi (nx, ny)

each array stored as f64 in column-major order (x index fastest).
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .grid import Grid, VectorField
from .scenarios import SCENARIOS, ScenarioParams
from .state import SimState

MAGIC = b"NSF1"
_HEADER = struct.Struct("<4sIIddd")


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # grid
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    # time
    dt: float = 2e-3
    t_end: float = 2.0
    # material law nu = theta^m, kappa = (1 + theta)^l
    m: float = 1.0
    l: float = 1.0  # noqa: E741  (conductivity exponent)
    # tolerances
    picard_tol: float = 1e-8
    max_sweeps: int = 50
    linear_tol: float = 1e-10
    heat_tol: float = 1e-12
    projection_tol: float = 1e-12
    dt_floor_factor: float = 64.0
    # initial data
    scenario: str = "pudding"
    theta_min: float = 10.0
    theta_bump: float = 1.0
    rho_amp: float = 0.02
    vel_amp: float = 1.0
    seed: int = 0
    density_threshold: float = 0.05
    # output
    snapshot_every: int = 10
    output_dir: str = ""
    deterministic: bool = False
    p: float = 8.0

    def __post_init__(self):
        errs = []
        if self.nx < 4 or self.ny < 4:
            errs.append("nx and ny must be at least 4")
        if not (self.lx > 0 and self.ly > 0):
            errs.append("lx and ly must be positive")
        if not self.dt > 0:
            errs.append("dt must be positive")
        if not self.t_end >= 0:
            errs.append("t_end must be nonnegative")
        for name in ("picard_tol", "linear_tol", "heat_tol", "projection_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                errs.append(f"{name} must lie in (0, 1)")
        if self.m < 0 or self.l < 0:
            errs.append("exponents m and l must be nonnegative")
        if not self.theta_min > 0:
            errs.append("theta_min must be positive")
        if self.theta_bump < 0:
            errs.append("theta_bump must be nonnegative")
        if not 0 <= self.rho_amp < 1:
            errs.append("rho_amp must lie in [0, 1)")
        if self.scenario not in SCENARIOS:
            errs.append(f"scenario must be one of {SCENARIOS}")
        if self.snapshot_every < 1:
            errs.append("snapshot_every must be at least 1")
        if self.max_sweeps < 1:
            errs.append("max_sweeps must be at least 1")
        if self.dt_floor_factor < 1:
            errs.append("dt_floor_factor must be at least 1")
        if self.p <= 1:
            errs.append("p must exceed 1")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.lx, self.ly)

    @property
    def scenario_params(self) -> ScenarioParams:
        return ScenarioParams(self.theta_min, self.theta_bump, self.rho_amp, self.vel_amp, self.seed)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def parse_overrides(pairs) -> dict:
    """``["key=value", ...]`` to typed keyword arguments."""
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = (x.strip() for x in item.split("=", 1))
        if k not in _TYPES:
            raise ConfigError(f"unknown key {k!r}")
        try:
            out[k] = _convert(k, v)
        except ValueError as exc:
            raise ConfigError(f"{k}: {exc}") from exc
    return out


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {n}: {key}: {exc}") from exc
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def write_manifest(path, cfg: RunConfig, code_version: str, wall_clock: float, extra: dict | None = None) -> Path:
    """Config echo; provenance lines are comments so the file parses back to ``cfg``."""
    head = [f"# code_version = {code_version}", f"# wall_clock_seconds = {wall_clock:.3f}"]
    for k, v in (extra or {}).items():
        head.append(f"# {k} = {v}")
    path = Path(path)
    path.write_text("\n".join(head) + "\n" + format_config(cfg))
    return path


# -- snapshots -----------------------------------------------------------------
def _arrays(s: SimState):
    return (s.rho, s.vel.u, s.vel.v, s.theta, s.pi)


def snapshot_bytes(s: SimState) -> bytes:
    g = s.grid
    parts = [_HEADER.pack(MAGIC, g.nx, g.ny, g.lx, g.ly, s.time)]
    for a in _arrays(s):
        parts.append(np.asarray(a, dtype="<f8").ravel(order="F").tobytes())
    return b"".join(parts)


def write_snapshot(path, s: SimState) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(snapshot_bytes(s))
    tmp.replace(path)
    return path


def snapshot_from_bytes(data: bytes) -> SimState:
    if len(data) < _HEADER.size:
        raise SnapshotError("snapshot shorter than its header")
    magic, nx, ny, lx, ly, time = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    try:
        g = Grid(nx, ny, lx, ly)
    except ValueError as exc:
        raise SnapshotError(f"bad grid in header: {exc}") from exc
    shapes = [g.shape, g.u_shape, g.v_shape, g.shape, g.shape]
    need = _HEADER.size + 8 * sum(a * b for a, b in shapes)
    if len(data) != need:
        raise SnapshotError(f"snapshot length {len(data)} does not match the {need} bytes implied by its header")
    out, off = [], _HEADER.size
    for shp in shapes:
        n = shp[0] * shp[1]
        out.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shp, order="F").astype(float))
        off += 8 * n
    rho, u, v, theta, pi = out
    try:
        return SimState(g, rho, VectorField(u, v), theta, pi, time)
    except ValueError as exc:
        raise SnapshotError(f"invalid state: {exc}") from exc


def read_snapshot(path) -> SimState:
    return snapshot_from_bytes(Path(path).read_bytes())
