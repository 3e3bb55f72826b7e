"""Post-processing of simulation output.

Energy and mass ledgers, the minimum-principle audit, exponential decay
fits, the smallness indicator K, a discrete proxy for the maximal-regularity
norms, and the linear/nonlinear split of a finished run.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, VectorField
from .heat import heat_semigroup_fields
from .momentum import kinetic_energy, l2_norm, stokes_semigroup_fields, viscous_work
from .state import (
    MaterialLaw,
    SimState,
    conductivity,
    conductivity_derivative,
    viscosity,
    viscosity_derivative,
)


# -- ledgers -------------------------------------------------------------------
@dataclass(frozen=True)
class EnergyLedger:
    time: float
    mass: float
    kinetic: float
    thermal: float
    total: float
    dissipation_rate: float
    modified: float


def ledger(s: SimState, law: MaterialLaw) -> EnergyLedger:
    """Integrated mass, energies and dissipation rate of one state.

    Kinetic energy is summed over the velocity faces with face densities,
    the quantity the momentum step actually balances.
    """
    g = s.grid
    A = g.cell_area
    mass = float(np.sum(s.rho)) * A
    kin = kinetic_energy(s.rho, s.vel, g)
    thermal = float(np.sum(s.rho * s.theta)) * A
    _, diss = viscous_work(s.vel, viscosity(s.theta, law), g)
    modified = float(np.sum(s.rho * (s.theta - law.theta_min))) * A + kin
    return EnergyLedger(s.time, mass, kin, thermal, kin + thermal, diss, modified)


def min_principle_audit(theta_series, theta_min: float) -> float:
    """Worst margin min(theta) - theta_min over a sequence of temperature fields."""
    worst = np.inf
    for th in theta_series:
        worst = min(worst, float(np.min(th)) - theta_min)
    if worst == np.inf:
        raise ValueError("empty temperature series")
    return worst


# -- decay fits ----------------------------------------------------------------
@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit norms ~ exp(intercept - rate * t).

    ``rate`` is positive for decay; ``residual`` is the RMS deviation of
    log(norms) from the line and ``window`` the half-open index range used.
    """

    rate: float
    intercept: float
    residual: float
    window: tuple[int, int]
    log_range: float = 0.0

    @property
    def slope(self) -> float:
        return -self.rate


def auto_window(norms, floor: float = 1e-12) -> tuple[int, int]:
    """Second half of the leading stretch where norms exceed ``floor * max``.

    Velocity and temperature fluctuations decay exponentially down to
    round-off; samples at the noise floor carry no rate information.
    """
    y = np.asarray(norms, dtype=float)
    if y.size < 2:
        raise ValueError("need at least two samples")
    cut = floor * np.max(np.abs(y))
    below = np.nonzero(~(y > cut))[0]
    end = int(below[0]) if below.size else y.size
    if end < 2:
        raise ValueError("series is at the noise floor from the start")
    start = end // 2
    if end - start < 2:
        start = end - 2
    return start, end


def decay_fit(times, norms, window: tuple[int, int] | None = None) -> DecayFit:
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and norms differ in length")
    i0, i1 = auto_window(y) if window is None else window
    if not 0 <= i0 < i1 <= y.size or i1 - i0 < 2:
        raise ValueError(f"window {window} needs at least two samples inside the series")
    tw, yw = t[i0:i1], y[i0:i1]
    if np.any(yw <= 0.0):
        raise ValueError("non-positive norm inside the fit window; shrink the window")
    ly = np.log(yw)
    slope, icept = np.polyfit(tw, ly, 1)
    res = ly - (icept + slope * tw)
    return DecayFit(
        rate=float(-slope),
        intercept=float(icept),
        residual=float(np.sqrt(np.mean(res**2))),
        window=(i0, i1),
        log_range=float(np.ptp(ly)),
    )


# -- norms ---------------------------------------------------------------------
def _lp(values: np.ndarray, p: float, A: float) -> float:
    a = np.abs(values)
    if np.isinf(p):
        return float(np.max(a)) if a.size else 0.0
    return float(np.sum(a**p) * A) ** (1.0 / p)


def density_gradient_norm(rho: np.ndarray, p: float, g: Grid) -> float:
    """Lp norm of the centred-difference gradient magnitude of a cell field."""
    if p < 1:
        raise ValueError("p must be at least 1")
    gx, gy = np.gradient(rho, g.hx, g.hy)
    return _lp(np.hypot(gx, gy), p, g.cell_area)


def _centre_components(f) -> list[np.ndarray]:
    if isinstance(f, VectorField):
        return [0.5 * (f.u[:-1] + f.u[1:]), 0.5 * (f.v[:, :-1] + f.v[:, 1:])]
    return [np.asarray(f, dtype=float)]


def _hessian_magnitude(comps: list[np.ndarray], g: Grid) -> np.ndarray:
    total = np.zeros(comps[0].shape)
    for c in comps:
        cx, cy = np.gradient(c, g.hx, g.hy)
        cxx, cxy = np.gradient(cx, g.hx, g.hy)
        cyx, cyy = np.gradient(cy, g.hx, g.hy)
        total += cxx**2 + cxy**2 + cyx**2 + cyy**2
    return np.sqrt(total)


def _magnitude(comps: list[np.ndarray]) -> np.ndarray:
    return np.sqrt(sum(c**2 for c in comps))


def xi_proxy(series: Sequence, scale: float, p: float = 8.0, *, times, g: Grid) -> float:
    """Discrete stand-in for the maximal-regularity norm of a field history.

        scale^(1-1/p) max_k (|f_k|_p + |H f_k|_p) + |D_t f|_{p,st} + scale |H f|_{p,st}

    ``H`` is the centred-difference Hessian, ``D_t`` the backward
    difference quotient and ``|.|_{p,st}`` the space-time Lp norm with the
    right-endpoint rule.  This is a PROXY: it has the scaling and
    homogeneity of the trace-space norm, not its value.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    t = np.asarray(times, dtype=float)
    if len(series) != t.size:
        raise ValueError("series and times differ in length")
    if t.size == 0:
        return 0.0
    A = g.cell_area
    comps = [_centre_components(f) for f in series]
    sup = max(_lp(_magnitude(c), p, A) + _lp(_hessian_magnitude(c, g), p, A) for c in comps)
    acc_t = acc_h = 0.0
    for k in range(1, t.size):
        dt = t[k] - t[k - 1]
        if dt <= 0:
            raise ValueError("times must increase")
        dq = _magnitude([(a - b) / dt for a, b in zip(comps[k], comps[k - 1])])
        acc_t += dt * _lp(dq, p, A) ** p
        acc_h += dt * _lp(scale * _hessian_magnitude(comps[k], g), p, A) ** p
    return scale ** (1.0 - 1.0 / p) * sup + acc_t ** (1.0 / p) + acc_h ** (1.0 / p)


# -- smallness indicator -------------------------------------------------------
@dataclass(frozen=True)
class Smallness:
    terms: tuple[float, float, float, float, float]
    K: float
    ratio_nu: float  # |nu(theta) - nu_min|_inf / nu_min
    ratio_kappa: float  # |kappa(theta) - kappa_min|_inf / kappa_min


def smallness_indicator(s: SimState, law: MaterialLaw, p: float = 8.0) -> Smallness:
    """The five terms of K from the field maxima of nu, nu' and kappa'."""
    nu_b, ka_b = law.nu_min, law.kappa_min
    th = s.theta
    nu = viscosity(th, law)
    ka = conductivity(th, law)
    terms = (
        nu_b ** (-2.0 + 1.0 / p),
        float(np.max(np.abs(viscosity_derivative(th, law)))) / (nu_b * ka_b ** (1.0 - 1.0 / p)),
        float(np.max(np.abs(nu))) / nu_b**2,
        nu_b ** (-1.0 + 1.0 / p) / ka_b,
        float(np.max(np.abs(conductivity_derivative(th, law)))) / ka_b ** (2.0 - 4.0 / p),
    )
    return Smallness(
        terms=tuple(float(x) for x in terms),
        K=float(max(terms)),
        ratio_nu=float(np.max(np.abs(nu - nu_b))) / nu_b,
        ratio_kappa=float(np.max(np.abs(ka - ka_b))) / ka_b,
    )


# -- split into linear and nonlinear parts -------------------------------------
@dataclass
class SplitReport:
    times: np.ndarray
    s_norms: np.ndarray  # |S(t)|_2, homogeneous Stokes part of v
    n_norms: np.ndarray  # |v - S|_2
    e_means: np.ndarray  # spatial mean of E, heat part of theta - theta_min
    h_norms: np.ndarray  # |theta - theta_min - E|_2
    n0: float
    h0: float
    e_mean_drift: float  # max |mean E(t) - mean E(0)|
    s_fit: DecayFit | None
    xi_n: float
    xi_h: float
    extra: dict = field(default_factory=dict)


def _check_cadence(snapshots: Sequence[SimState], dt: float, every: int) -> None:
    t0 = snapshots[0].time
    for k, snap in enumerate(snapshots):
        want = t0 + k * every * dt
        if abs(snap.time - want) > 1e-9 * max(1.0, abs(want)):
            raise ValueError(f"snapshot {k} at t={snap.time} does not match the cadence {every} x {dt} (expected {want})")


def split_experiment(
    snapshots: Sequence[SimState], law: MaterialLaw, dt: float, snapshot_every: int, p: float = 8.0
) -> SplitReport:
    """Split v = N + S and theta = H + E + theta_min along stored snapshots.

    S and E are the constant-coefficient Stokes and Neumann heat evolutions
    (coefficients nu_min and kappa_min) from the initial data, advanced with
    the run's own step ``dt`` and sampled every ``snapshot_every`` steps.
    """
    if not snapshots:
        raise ValueError("no snapshots")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be positive")
    _check_cadence(snapshots, dt, snapshot_every)
    g = snapshots[0].grid
    A = g.cell_area
    n_steps = (len(snapshots) - 1) * snapshot_every
    s_gen = stokes_semigroup_fields(snapshots[0].vel, law.nu_min, dt, n_steps, g)
    e_gen = heat_semigroup_fields(snapshots[0].theta - law.theta_min, law.kappa_min, dt, n_steps, g)
    times, s_n, n_n, e_m, h_n = [], [], [], [], []
    n_series, h_series = [], []
    k = 0
    for step, (S, E) in enumerate(zip(s_gen, e_gen)):
        if step % snapshot_every:
            continue
        snap = snapshots[k]
        k += 1
        N = snap.vel - S
        H = snap.theta - law.theta_min - E
        times.append(snap.time)
        s_n.append(l2_norm(S, g))
        n_n.append(l2_norm(N, g))
        e_m.append(float(np.mean(E)))
        h_n.append(float(np.sqrt(np.sum(H * H) * A)))
        n_series.append(N)
        h_series.append(H - np.mean(H))
    times = np.array(times)
    e_m = np.array(e_m)
    s_n = np.array(s_n)
    try:
        fit = decay_fit(times, s_n) if s_n[0] > 0 else None
    except ValueError:
        fit = None
    return SplitReport(
        times=times,
        s_norms=s_n,
        n_norms=np.array(n_n),
        e_means=e_m,
        h_norms=np.array(h_n),
        n0=n_n[0],
        h0=h_n[0],
        e_mean_drift=float(np.max(np.abs(e_m - e_m[0]))),
        s_fit=fit,
        xi_n=xi_proxy(n_series, law.nu_min, p, times=times, g=g),
        xi_h=xi_proxy(h_series, law.kappa_min, p / 2, times=times, g=g),
    )


# -- accumulated mean temperature ----------------------------------------------
@dataclass
class TildeTrack:
    times: np.ndarray
    theta_tilde: np.ndarray
    l2_residual: np.ndarray  # |theta - theta_min - theta_tilde|_2
    weighted_residual: np.ndarray  # sum rho (theta - theta_min - theta_tilde) A
    mass: float
    fit: DecayFit | None


def theta_tilde_track(snapshots: Sequence[SimState], law: MaterialLaw, heat_added=None) -> TildeTrack:
    """Track theta_tilde(t) = (int rho0 (theta0 - theta_min) + dissipated heat) / mass.

    ``heat_added[k]`` is the heat released by dissipation between the first
    snapshot and snapshot ``k``.  Passing the per-step totals of the scheme
    makes the weighted residual vanish to solver tolerance; without it the
    dissipation rates of the snapshots are integrated with the trapezoidal
    rule.
    """
    if not snapshots:
        raise ValueError("no snapshots")
    g = snapshots[0].grid
    A = g.cell_area
    times = np.array([s.time for s in snapshots])
    if heat_added is None:
        rates = np.array([ledger(s, law).dissipation_rate for s in snapshots])
        heat_added = np.concatenate([[0.0], np.cumsum(0.5 * (rates[1:] + rates[:-1]) * np.diff(times))])
    heat_added = np.asarray(heat_added, dtype=float)
    if heat_added.shape != times.shape:
        raise ValueError("heat_added must have one entry per snapshot")
    s0 = snapshots[0]
    mass = float(np.sum(s0.rho)) * A
    base = float(np.sum(s0.rho * (s0.theta - law.theta_min))) * A
    tilde = (base + heat_added) / mass
    l2, wres = [], []
    for s, tt in zip(snapshots, tilde):
        d = s.theta - law.theta_min - tt
        l2.append(float(np.sqrt(np.sum(d * d) * A)))
        wres.append(float(np.sum(s.rho * d)) * A)
    l2 = np.array(l2)
    try:
        fit = decay_fit(times, l2) if l2[0] > 0 else None
    except ValueError:
        fit = None
    return TildeTrack(times, tilde, l2, np.array(wres), mass, fit)


# -- output --------------------------------------------------------------------
def write_csv(path, header: Sequence[str], rows) -> Path:
    """Header row, then one row per record; floats in round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path
