"""One time step as a successive-approximation sweep over (rho, v, theta).

Sweep ``k`` freezes every coefficient at iterate ``k - 1``:

1. ``rho^k``   from the upwind transport with velocity ``v^{k-1}``;
2. ``v^k``     from the implicit momentum step with nu(theta^{k-1}) and
               advecting velocity ``v^{k-1}``, then the projection (which
               also yields ``pi^k``);
3. ``theta^k`` from the implicit heat step with kappa(theta^{k-1}) and the
               dissipation nu(theta^{k-1}) D(v^k):D(v^k) as source.

Iterate 0 is the previous time level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import VectorField, divergence
from .heat import HEAT_SPEC, heat_step
from .linsolve import FactorCache, LinearSolverSpec, SolverError
from .momentum import MOMENTUM_SPEC, POISSON_SPEC, momentum_step, project, viscous_power, viscous_work
from .state import MaterialLaw, SimState, viscosity
from .transport import CFLError, mass_flux, transport_density

log = logging.getLogger(__name__)


@dataclass
class IterationReport:
    sweeps: int = 0
    delta_rho: list[float] = field(default_factory=list)
    delta_v: list[float] = field(default_factory=list)
    delta_theta: list[float] = field(default_factory=list)
    converged: bool = False
    contraction_ratios: list[float] = field(default_factory=list)
    # energy bookkeeping of the accepted iterate
    heat_input: float = 0.0  # dt * integral of the heat source (dissipation plus external)
    viscous_loss: float = 0.0  # -dt * A <v, div(nu D v)> with the same nu
    max_div: float = 0.0

    def combined(self) -> np.ndarray:
        return np.asarray(self.delta_rho) + np.asarray(self.delta_v) + np.asarray(self.delta_theta)


class StepRejected(RuntimeError):
    def __init__(self, msg: str, report: IterationReport):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class SolverSettings:
    momentum: LinearSolverSpec = MOMENTUM_SPEC
    poisson: LinearSolverSpec = POISSON_SPEC
    heat: LinearSolverSpec = HEAT_SPEC


@dataclass
class Workspace:
    """Preconditioner factors carried from step to step."""

    momentum: FactorCache = field(default_factory=FactorCache)
    heat: FactorCache = field(default_factory=FactorCache)


def _rel(new: np.ndarray, old: np.ndarray) -> float:
    num = np.linalg.norm(new - old)
    den = max(np.linalg.norm(new), np.linalg.norm(old))
    return 0.0 if num == 0.0 else float(num / den)


def _vel_array(w: VectorField) -> np.ndarray:
    return np.concatenate([w.u.ravel(), w.v.ravel()])


def advance(
    s: SimState,
    dt: float,
    law: MaterialLaw,
    tol: float = 1e-8,
    max_sweeps: int = 50,
    solvers: SolverSettings = SolverSettings(),
    workspace: Workspace | None = None,
    *,
    body_force=None,
    heat_source=None,
    advect: bool = True,
) -> tuple[SimState, IterationReport]:
    """Advance one step of size ``dt``; raise StepRejected if the sweep stalls.

    ``body_force(t)`` and ``heat_source(t)`` (callables returning a
    VectorField and a cell array) add external terms evaluated at the new
    time level.  ``advect=False`` drops transport of every field, which
    leaves the density frozen; both hooks exist for manufactured solutions.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    ws = Workspace() if workspace is None else workspace
    g = s.grid
    t_new = s.time + dt
    f_ext = None if body_force is None else body_force(t_new)
    q_ext = None if heat_source is None else heat_source(t_new)
    still = VectorField.zeros(g)
    rep = IterationReport()
    rho_k, vel_k, theta_k, pi_k = s.rho, s.vel, s.theta, s.pi
    prev_combined = None
    for k in range(1, max_sweeps + 1):
        lag_v, lag_t = vel_k, theta_k
        try:
            adv = lag_v if advect else still
            F = mass_flux(s.rho, adv, g)
            rho_new = transport_density(s.rho, adv, dt, g, flux=F)
            vstar = momentum_step(
                s, adv, lag_t, dt, law, solvers.momentum, rho_new=rho_new, flux=F, forcing=f_ext, cache=ws.momentum
            )
            vel_new, pi_new = project(vstar, rho_new, dt, solvers.poisson, g)
            nu_lag = viscosity(lag_t, law)
            q, q_total = viscous_work(vel_new, nu_lag, g)
            if q_ext is not None:
                q = q + q_ext
                q_total += float(np.sum(q_ext)) * g.cell_area
            theta_new = heat_step(s, adv, lag_t, vel_new, dt, law, solvers.heat, rho_new=rho_new, flux=F, source=q, cache=ws.heat)
        except (SolverError, CFLError, ValueError) as exc:
            rep.sweeps = k - 1
            raise StepRejected(f"sweep {k}: {exc}", rep) from exc
        rep.delta_rho.append(_rel(rho_new, rho_k))
        rep.delta_v.append(_rel(_vel_array(vel_new), _vel_array(vel_k)))
        rep.delta_theta.append(_rel(theta_new, theta_k))
        comb = rep.delta_rho[-1] + rep.delta_v[-1] + rep.delta_theta[-1]
        if prev_combined:
            rep.contraction_ratios.append(comb / prev_combined)
        prev_combined = comb
        rho_k, vel_k, theta_k, pi_k = rho_new, vel_new, theta_new, pi_new
        rep.sweeps = k
        if not np.all(np.isfinite(theta_k)) or not np.all(np.isfinite(vel_k.u)):
            raise StepRejected(f"sweep {k}: non-finite iterate", rep)
        if max(rep.delta_rho[-1], rep.delta_v[-1], rep.delta_theta[-1]) < tol:
            rep.converged = True
            rep.heat_input = dt * q_total
            rep.viscous_loss = -dt * viscous_power(vel_k, nu_lag, g)
            rep.max_div = float(np.max(np.abs(divergence(vel_k, g))))
            break
    if not rep.converged:
        raise StepRejected(f"no convergence in {max_sweeps} sweeps (last deltas {comb:.3e})", rep)
    new = SimState(g, rho_k, vel_k, theta_k, pi_k, t_new)
    return new, rep


def contraction_certificate(r: IterationReport, last: int | None = None) -> float:
    """Largest ratio of consecutive combined deltas (rho + v + theta).

    All ratios of the sweep count by default, the first one included (it
    measures how much the second sweep corrects the first).  ``last``
    restricts the maximum to the final ``last`` ratios.  Below 1 the sweep
    contracted empirically; at most 1/2 matches the factor of the L2
    contraction estimate for the continuous iteration.
    """
    d = r.combined()
    if len(d) < 3:
        raise ValueError(f"certificate needs at least 3 sweeps, report has {len(d)}")
    ratios = [d[k] / d[k - 1] for k in range(1, len(d)) if d[k - 1] > 0]
    if not ratios:
        return 0.0
    if last is not None:
        ratios = ratios[-last:]
    return float(max(ratios))
