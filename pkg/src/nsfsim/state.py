"""Simulation state and the power-law viscosity and conductivity."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, VectorField, divergence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaterialLaw:
    """nu(theta) = theta**m, kappa(theta) = (1 + theta)**l, referenced at theta_min.

    ``nu_min`` and ``kappa_min`` are derived from ``theta_min``; passing
    inconsistent values raises.
    """

    m: float
    l: float  # noqa: E741  (conductivity exponent)
    theta_min: float
    nu_min: float = field(default=None)
    kappa_min: float = field(default=None)

    def __post_init__(self):
        if self.m < 0 or self.l < 0:
            raise ValueError("material exponents must be nonnegative")
        if not self.theta_min > 0:
            raise ValueError("theta_min must be positive")
        nu = self.theta_min**self.m
        kappa = (1.0 + self.theta_min) ** self.l
        for name, given, want in (("nu_min", self.nu_min, nu), ("kappa_min", self.kappa_min, kappa)):
            if given is None:
                object.__setattr__(self, name, want)
            elif not np.isclose(given, want, rtol=1e-14, atol=0.0):
                raise ValueError(f"{name}={given} inconsistent with theta_min (expected {want})")

    def with_theta_min(self, theta_min: float) -> "MaterialLaw":
        return MaterialLaw(self.m, self.l, theta_min)


def _positive(theta):
    if np.any(np.asarray(theta) <= 0):
        raise ValueError("viscosity law needs positive temperature")


def _above_minus_one(theta):
    if np.any(np.asarray(theta) <= -1):
        raise ValueError("conductivity law needs temperature above -1")


def viscosity(theta, law: MaterialLaw):
    _positive(theta)
    return np.power(np.asarray(theta, dtype=float), law.m)


def viscosity_derivative(theta, law: MaterialLaw):
    _positive(theta)
    return law.m * np.power(np.asarray(theta, dtype=float), law.m - 1.0)


def conductivity(theta, law: MaterialLaw):
    _above_minus_one(theta)
    return np.power(1.0 + np.asarray(theta, dtype=float), law.l)


def conductivity_derivative(theta, law: MaterialLaw):
    _above_minus_one(theta)
    return law.l * np.power(1.0 + np.asarray(theta, dtype=float), law.l - 1.0)


@dataclass
class SimState:
    grid: Grid
    rho: np.ndarray
    vel: VectorField
    theta: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        g = self.grid
        for name in ("rho", "theta", "pi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != g.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid expects {g.shape}")
            setattr(self, name, arr)
        self.vel.check(g)

    def copy(self) -> "SimState":
        return SimState(self.grid, self.rho.copy(), self.vel.copy(), self.theta.copy(), self.pi.copy(), self.time)

    def with_fields(self, **kw) -> "SimState":
        return replace(self, **kw)

    def check_invariants(self, law: MaterialLaw, theta_tol: float = 1e-9, div_tol: float | None = None) -> list[str]:
        """Return a list of violated state invariants (empty when all hold)."""
        bad = []
        if not np.all(np.isfinite(self.rho)) or not np.all(np.isfinite(self.theta)):
            bad.append("non-finite scalar field")
        if np.min(self.rho) <= 0:
            bad.append("nonpositive density")
        if np.min(self.theta) < law.theta_min - theta_tol:
            bad.append(f"temperature {np.min(self.theta)} below theta_min {law.theta_min}")
        if div_tol is not None:
            d = np.max(np.abs(divergence(self.vel, self.grid)))
            if d > div_tol:
                bad.append(f"divergence {d:.3e} above {div_tol:.1e}")
        if self.vel.wall_normal_max() != 0.0:
            bad.append("nonzero wall-normal velocity")
        return bad


@dataclass
class InitialDataReport:
    density_deviation: float
    theta_min: float
    threshold: float
    density_ok: bool
    law: MaterialLaw


def validate_initial_data(s: SimState, law: MaterialLaw, c_threshold: float) -> InitialDataReport:
    """Check the density perturbation against ``c_threshold`` and fix theta_min = min theta0.

    Never raises; a failed density check is logged as a warning.
    """
    dev = float(np.max(np.abs(s.rho - 1.0)))
    tmin = float(np.min(s.theta))
    ok = dev < c_threshold
    if not ok:
        log.warning("density perturbation %.3g is not below threshold %.3g", dev, c_threshold)
    new_law = law.with_theta_min(tmin) if tmin > 0 else law
    if tmin <= 0:
        log.warning("initial temperature minimum %.3g is not positive; keeping theta_min=%g", tmin, law.theta_min)
    return InitialDataReport(dev, tmin, c_threshold, ok, new_law)
