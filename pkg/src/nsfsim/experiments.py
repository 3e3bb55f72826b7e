"""Experiment recipes: each runs end to end and checks its acceptance bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import decay_fit, smallness_indicator, split_experiment
from .io import RunConfig
from .linsolve import LinearSolverSpec
from .mms import Manufactured, observed_orders, run_mms
from .momentum import l2_norm
from .picard import SolverSettings
from .runner import RunResult, integrate
from .scenarios import make_state
from .state import MaterialLaw, SimState, validate_initial_data

log = logging.getLogger(__name__)

EXPERIMENTS = ("decay", "split", "contraction", "mms", "smallness")

# Recipe defaults, applied below any user config.
RECIPE_DEFAULTS = {
    "decay": dict(theta_min=1.0, theta_bump=0.1, t_end=1.0, snapshot_every=50),
    "split": dict(t_end=2.0, snapshot_every=10),
    "contraction": dict(dt=1e-3, t_end=1e-2, nx=32, ny=32),
    "mms": dict(m=1.0, l=1.0),
    "smallness": dict(m=1.0, l=1.0),
}


@dataclass
class Check:
    label: str
    value: float
    bound: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.label}: {self.value:.6g} ({self.bound})"


@dataclass
class ExperimentResult:
    name: str
    header: tuple
    rows: list = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"experiment {self.name}: {'PASS' if self.passed else 'FAIL'}"]
        lines += [c.line() for c in self.checks]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def solver_settings(cfg: RunConfig) -> SolverSettings:
    return SolverSettings(
        momentum=LinearSolverSpec("bicgstab", cfg.linear_tol, 1000),
        poisson=LinearSolverSpec("cg", cfg.projection_tol, 2000),
        heat=LinearSolverSpec("bicgstab", cfg.heat_tol, 1000),
    )


def initial_state(cfg: RunConfig) -> tuple[SimState, MaterialLaw]:
    s = make_state(cfg.scenario, cfg.grid, cfg.scenario_params)
    rep = validate_initial_data(s, MaterialLaw(cfg.m, cfg.l, cfg.theta_min), cfg.density_threshold)
    return s, rep.law


def simulate(cfg: RunConfig, s0: SimState | None = None, law: MaterialLaw | None = None, **kw) -> RunResult:
    if s0 is None:
        s0, law = initial_state(cfg)
    return integrate(
        s0,
        law,
        cfg.dt,
        cfg.t_end,
        tol=cfg.picard_tol,
        max_sweeps=cfg.max_sweeps,
        solvers=solver_settings(cfg),
        snapshot_every=cfg.snapshot_every,
        dt_floor_factor=cfg.dt_floor_factor,
        p=cfg.p,
        **kw,
    )


def velocity_series(res: RunResult) -> tuple[np.ndarray, np.ndarray]:
    """Times and L2 velocity norms at every step, the initial state included."""
    t = np.concatenate([[res.initial.time], res.series("time")])
    n = np.concatenate([[l2_norm(res.initial.vel, res.initial.grid)], res.series("vel_l2")])
    return t, n


# -- recipes -------------------------------------------------------------------
def decay(cfg: RunConfig) -> ExperimentResult:
    """Velocity decay at nu_min and 2 nu_min; the fitted rates should scale alike."""
    if cfg.m <= 0:
        raise ValueError("decay experiment needs m > 0 to change nu_min through theta_min")
    factor = 2.0 ** (1.0 / cfg.m)
    out = ExperimentResult("decay", ("label", "theta_min", "nu_min", "rate", "residual", "window_start", "window_end"))
    fits = []
    for label, c in (
        ("base", cfg),
        ("doubled", cfg.replace(theta_min=cfg.theta_min * factor, theta_bump=cfg.theta_bump * factor)),
    ):
        res = simulate(c, keep_snapshots=False)
        t, n = velocity_series(res)
        fit = decay_fit(t, n)
        fits.append(fit)
        out.rows.append((label, c.theta_min, res.law.nu_min, fit.rate, fit.residual, *fit.window))
    ratio = fits[1].rate / fits[0].rate
    out.rows.append(("ratio", "", "", ratio, "", "", ""))
    out.checks += [
        Check("base velocity norm decays (rate > 0)", fits[0].rate, "> 0", fits[0].rate > 0),
        Check("doubled velocity norm decays (rate > 0)", fits[1].rate, "> 0", fits[1].rate > 0),
        Check("rate ratio", ratio, "in [1.6, 2.4]", 1.6 <= ratio <= 2.4),
    ]
    return out


def _xi_total(rep) -> float:
    return rep.xi_n + rep.xi_h


def split(cfg: RunConfig, res: RunResult | None = None) -> ExperimentResult:
    """N + S and H + E split of a run, with the proxy norm at T and 2T."""
    if res is None:
        res = simulate(cfg)
    snaps = res.snapshots
    every = cfg.snapshot_every
    rep = split_experiment(snaps, res.law, cfg.dt, every, cfg.p)
    out = ExperimentResult("split", ("time", "S_norm", "N_norm", "E_mean", "H_norm"))
    for row in zip(rep.times, rep.s_norms, rep.n_norms, rep.e_means, rep.h_norms):
        out.rows.append(row)
    fit = rep.s_fit
    res_ok = fit is not None and fit.residual <= 0.05 * fit.log_range
    out.checks += [
        Check("|N(0)|", rep.n0, "<= 1e-12", rep.n0 <= 1e-12),
        Check("|H(0)|", rep.h0, "<= 1e-12", rep.h0 <= 1e-12),
        Check("E mean drift", rep.e_mean_drift, "<= 1e-12", rep.e_mean_drift <= 1e-12),
        Check(
            "S log-linear fit residual / log range",
            float("nan") if fit is None else fit.residual / max(fit.log_range, 1e-300),
            "<= 0.05",
            res_ok,
        ),
        Check("S fitted decay rate", float("nan") if fit is None else fit.rate, "> 0", fit is not None and fit.rate > 0),
    ]
    if len(snaps) >= 3 and (len(snaps) - 1) % 2 == 0:
        half = split_experiment(snaps[: (len(snaps) - 1) // 2 + 1], res.law, cfg.dt, every, cfg.p)
        a, b = _xi_total(half), _xi_total(rep)
        rel = abs(b - a) / max(abs(a), 1e-300)
        out.checks.append(Check("proxy norm change from T to 2T (relative)", rel, "<= 0.05", rel <= 0.05))
        out.notes.append(f"proxy at T={half.times[-1]:g}: {a:.6g}; at 2T={rep.times[-1]:g}: {b:.6g}")
    else:
        out.notes.append("proxy comparison skipped: needs an even number of snapshot intervals")
    return out


def _max_certificate(res: RunResult) -> tuple[float, int]:
    c = res.series("certificate")
    c = c[np.isfinite(c)]
    return (float(np.max(c)) if c.size else float("nan")), int(c.size)


def contraction(cfg: RunConfig) -> ExperimentResult:
    """Picard contraction certificate at dt and dt/2 over the same time window."""
    out = ExperimentResult("contraction", ("dt", "max_certificate", "steps_with_certificate", "max_sweeps"))
    certs = []
    for dt in (cfg.dt, cfg.dt / 2):
        res = simulate(cfg.replace(dt=dt), keep_snapshots=False)
        c, n = _max_certificate(res)
        certs.append(c)
        out.rows.append((dt, c, n, int(res.series("sweeps").max())))
    out.checks += [
        Check(f"certificate at dt={cfg.dt:g}", certs[0], "< 1", certs[0] < 1),
        Check(f"certificate at dt={cfg.dt / 2:g} minus at dt={cfg.dt:g}", certs[1] - certs[0], "<= 0", certs[1] <= certs[0]),
    ]
    return out


def mms(cfg: RunConfig, sizes=(32, 64, 128)) -> ExperimentResult:
    mf = Manufactured(m=cfg.m, l=cfg.l)
    results = [run_mms(mf, n) for n in sizes]
    ou, ot = observed_orders(results)
    out = ExperimentResult("mms", ("n", "err_velocity", "err_theta", "order_velocity", "order_theta", "max_div"))
    for k, r in enumerate(results):
        out.rows.append((r.n, r.err_u, r.err_theta, ou[k - 1] if k else "", ot[k - 1] if k else "", r.max_div))
    md = max(r.max_div for r in results)
    out.checks += [
        Check("velocity order (worst pair)", min(ou), ">= 1.8", min(ou) >= 1.8),
        Check("temperature order (worst pair)", min(ot), ">= 1.8", min(ot) >= 1.8),
        Check("max |div v| after projection", md, "<= 1e-10", md <= 1e-10),
    ]
    return out


def smallness(cfg: RunConfig, theta_mins=(1.0, 10.0, 100.0)) -> ExperimentResult:
    out = ExperimentResult("smallness", ("theta_min", "K", "t1", "t2", "t3", "t4", "t5", "ratio_nu", "ratio_kappa"))
    Ks, rn, rk = [], [], []
    for tm in theta_mins:
        s, law = initial_state(cfg.replace(theta_min=tm))
        sm = smallness_indicator(s, law, cfg.p)
        Ks.append(sm.K)
        rn.append(sm.ratio_nu)
        rk.append(sm.ratio_kappa)
        out.rows.append((tm, sm.K, *sm.terms, sm.ratio_nu, sm.ratio_kappa))
    dec = lambda xs: all(b < a for a, b in zip(xs, xs[1:]))  # noqa: E731
    out.checks += [
        Check("K strictly decreasing in theta_min", float(dec(Ks)), "1 = yes", dec(Ks)),
        Check("nu ratio decreasing in theta_min", float(dec(rn)), "1 = yes", dec(rn)),
        Check("kappa ratio decreasing in theta_min", float(dec(rk)), "1 = yes", dec(rk)),
    ]
    return out


RECIPES = {"decay": decay, "split": split, "contraction": contraction, "mms": mms, "smallness": smallness}


def run_experiment(name: str, cfg: RunConfig) -> ExperimentResult:
    if name not in RECIPES:
        raise ValueError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    return RECIPES[name](cfg)
