"""Time integration driver: step control, per-step records and snapshots."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import density_gradient_norm, ledger, smallness_indicator
from .momentum import kinetic_energy, l2_norm
from .picard import IterationReport, SolverSettings, StepRejected, Workspace, advance, contraction_certificate
from .state import MaterialLaw, SimState

log = logging.getLogger(__name__)

LEDGER_COLUMNS = (
    "time",
    "mass",
    "kinetic",
    "thermal",
    "total",
    "dissipation_rate",
    "modified",
    "min_theta",
    "K",
    "nb_ratio_nu",
    "nb_ratio_kappa",
    "grad_rho_lp",
    "sweeps",
)


def ledger_row(s: SimState, law: MaterialLaw, sweeps: int = 0, p: float = 8.0) -> tuple:
    led = ledger(s, law)
    sm = smallness_indicator(s, law, p)
    return (
        led.time,
        led.mass,
        led.kinetic,
        led.thermal,
        led.total,
        led.dissipation_rate,
        led.modified,
        float(np.min(s.theta)),
        sm.K,
        sm.ratio_nu,
        sm.ratio_kappa,
        density_gradient_norm(s.rho, p, s.grid),
        int(sweeps),
    )


@dataclass
class StepRecord:
    """Quantities checked after every accepted step."""

    time: float
    dt: float
    sweeps: int
    substeps: int
    certificate: float  # nan when the sweep needed fewer than 3 iterations
    heat_input: float
    viscous_loss: float
    kinetic: float
    vel_l2: float
    thermal: float
    mass: float
    min_theta: float
    rho_dev: float  # max |rho - 1|
    max_div: float


@dataclass
class RunResult:
    law: MaterialLaw
    initial: SimState
    final: SimState
    snapshots: list[SimState] = field(default_factory=list)
    snapshot_steps: list[int] = field(default_factory=list)
    heat_added: list[float] = field(default_factory=list)  # cumulative, at each snapshot
    ledger_rows: list[tuple] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    reports: list[IterationReport] = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.steps])


def _merge(a: IterationReport, b: IterationReport) -> IterationReport:
    out = IterationReport(
        sweeps=max(a.sweeps, b.sweeps),
        delta_rho=b.delta_rho,
        delta_v=b.delta_v,
        delta_theta=b.delta_theta,
        converged=a.converged and b.converged,
        contraction_ratios=b.contraction_ratios,
    )
    out.heat_input = a.heat_input + b.heat_input
    out.viscous_loss = a.viscous_loss + b.viscous_loss
    out.max_div = max(a.max_div, b.max_div)
    return out


def advance_adaptive(s, dt, law, dt_floor, ws, **kw) -> tuple[SimState, IterationReport, int]:
    """One step of size dt, replaced by two half steps on rejection down to ``dt_floor``."""
    try:
        new, rep = advance(s, dt, law, workspace=ws, **kw)
        return new, rep, 1
    except StepRejected as exc:
        half = 0.5 * dt
        if half < dt_floor * (1 - 1e-12):
            raise StepRejected(f"step rejected at dt={dt:.3e}, floor {dt_floor:.3e} reached: {exc}", exc.report) from exc
        log.info("t=%.6g: step of %.3e rejected (%s); halving", s.time, dt, exc)
        ws.momentum.clear()
        ws.heat.clear()
        mid, r1, n1 = advance_adaptive(s, half, law, dt_floor, ws, **kw)
        end, r2, n2 = advance_adaptive(mid, half, law, dt_floor, ws, **kw)
        return end, _merge(r1, r2), n1 + n2


def _certificate(rep: IterationReport) -> float:
    try:
        return contraction_certificate(rep)
    except ValueError:
        return float("nan")


def integrate(
    s0: SimState,
    law: MaterialLaw,
    dt: float,
    t_end: float,
    *,
    tol: float = 1e-8,
    max_sweeps: int = 50,
    solvers: SolverSettings = SolverSettings(),
    snapshot_every: int = 1,
    dt_floor_factor: float = 64.0,
    p: float = 8.0,
    keep_snapshots: bool = True,
    keep_reports: bool = False,
    on_snapshot=None,
    start_step: int | None = None,
    heat_added0: float = 0.0,
    **advance_kw,
) -> RunResult:
    """Advance ``s0`` to ``t_end`` with steps of ``dt``.

    A snapshot (state, cumulative dissipated heat and ledger row) is taken
    at the start, every ``snapshot_every`` steps and at the end;
    ``on_snapshot(state, row, step)`` is called for each.  The factor caches
    are reset after every snapshot so a run resumed from a snapshot retraces
    the uninterrupted one exactly.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < s0.time:
        raise ValueError("t_end lies before the initial time")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be at least 1")
    step0 = int(round(s0.time / dt)) if start_step is None else start_step
    n_total = int(math.ceil(t_end / dt - 1e-9))
    ws = Workspace()
    res = RunResult(law=law, initial=s0, final=s0)
    heat = heat_added0
    s = s0

    def snap(state, sweeps, step):
        row = ledger_row(state, law, sweeps, p)
        res.ledger_rows.append(row)
        res.heat_added.append(heat)
        res.snapshot_steps.append(step)
        if keep_snapshots:
            res.snapshots.append(state)
        if on_snapshot is not None:
            on_snapshot(state, row, step)
        ws.momentum.clear()
        ws.heat.clear()

    snap(s, 0, step0)
    g = s0.grid
    A = g.cell_area
    # times come from the step index, so a run resumed from a snapshot sees
    # the same step sizes and clock as the uninterrupted one
    on_lattice = abs(s0.time - step0 * dt) <= 1e-9 * dt

    def clock(step):
        return step * dt if on_lattice else s0.time + (step - step0) * dt

    for step in range(step0 + 1, n_total + 1):
        rest = t_end - s.time
        if rest <= 1e-12 * dt:
            break
        h = dt if rest >= dt * (1 - 1e-9) else rest
        new, rep, nsub = advance_adaptive(
            s, h, law, h / dt_floor_factor, ws, tol=tol, max_sweeps=max_sweeps, solvers=solvers, **advance_kw
        )
        t_new = float(t_end) if step == n_total and abs(clock(step) - t_end) < 1e-9 * dt else min(clock(step), float(t_end))
        new = new.with_fields(time=t_new)
        heat += rep.heat_input
        res.steps.append(
            StepRecord(
                time=new.time,
                dt=h,
                sweeps=rep.sweeps,
                substeps=nsub,
                certificate=_certificate(rep),
                heat_input=rep.heat_input,
                viscous_loss=rep.viscous_loss,
                kinetic=kinetic_energy(new.rho, new.vel, g),
                vel_l2=l2_norm(new.vel, g),
                thermal=float(np.sum(new.rho * new.theta)) * A,
                mass=float(np.sum(new.rho)) * A,
                min_theta=float(np.min(new.theta)),
                rho_dev=float(np.max(np.abs(new.rho - 1.0))),
                max_div=rep.max_div,
            )
        )
        if keep_reports:
            res.reports.append(rep)
        s = new
        if step % snapshot_every == 0 or step == n_total:
            snap(s, rep.sweeps, step)
    res.final = s
    return res
