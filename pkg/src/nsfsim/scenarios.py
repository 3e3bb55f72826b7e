"""Named initial-data recipes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, VectorField
from .state import SimState

SCENARIOS = ("pudding", "rest", "random")


@dataclass(frozen=True)
class ScenarioParams:
    theta_min: float = 10.0
    theta_bump: float = 1.0
    rho_amp: float = 0.02
    vel_amp: float = 1.0
    seed: int = 0


def velocity_from_streamfunction(psi: np.ndarray, g: Grid) -> VectorField:
    """Face velocities from nodal psi: u = d psi/dy, v = -d psi/dx.

    Discretely divergence-free to round-off; wall-normal components vanish
    when psi is zero on the boundary nodes.
    """
    if psi.shape != g.node_shape:
        raise ValueError("stream function must live on nodes")
    u = (psi[:, 1:] - psi[:, :-1]) / g.hy
    v = -(psi[1:, :] - psi[:-1, :]) / g.hx
    return VectorField(u, v).zero_walls()


def vortex(g: Grid, amp: float = 1.0) -> VectorField:
    """Single cell-filling vortex with peak speed about ``amp``."""
    X, Y = g.node_mesh()
    sx, sy = np.sin(np.pi * X / g.lx) ** 2, np.sin(np.pi * Y / g.ly) ** 2
    # peak of d/dy sin^2(pi y/ly) is pi/ly
    psi = amp * (g.ly / np.pi) * sx * sy
    return velocity_from_streamfunction(psi, g)


def random_vortices(g: Grid, amp: float, seed: int, modes: int = 3) -> VectorField:
    rng = np.random.default_rng(seed)
    X, Y = g.node_mesh()
    psi = np.zeros(g.node_shape)
    for a in range(1, modes + 1):
        for b in range(1, modes + 1):
            psi += rng.normal() / (a * a + b * b) * np.sin(a * np.pi * X / g.lx) * np.sin(b * np.pi * Y / g.ly)
    w = velocity_from_streamfunction(psi, g)
    return w * (amp / max(w.max_abs(), 1e-300))


def temperature_bump(g: Grid, theta_min: float, bump: float) -> np.ndarray:
    """theta_min + bump * profile, with the profile scaled to [0, 1] on the cells."""
    X, Y = g.cell_mesh()
    f = np.exp(-((X - 0.35 * g.lx) ** 2 + (Y - 0.6 * g.ly) ** 2) / (0.15 * min(g.lx, g.ly)) ** 2)
    f = (f - f.min()) / (f.max() - f.min())
    return theta_min + bump * f


def density_perturbation(g: Grid, amp: float) -> np.ndarray:
    X, Y = g.cell_mesh()
    return 1.0 + amp * np.sin(2 * np.pi * X / g.lx) * np.cos(np.pi * Y / g.ly)


def make_state(name: str, g: Grid, p: ScenarioParams = ScenarioParams()) -> SimState:
    if name == "pudding":
        vel = vortex(g, p.vel_amp)
        rho = density_perturbation(g, p.rho_amp)
        theta = temperature_bump(g, p.theta_min, p.theta_bump)
    elif name == "rest":
        vel = VectorField.zeros(g)
        rho = np.ones(g.shape)
        theta = np.full(g.shape, p.theta_min)
    elif name == "random":
        rng = np.random.default_rng(p.seed + 1)
        vel = random_vortices(g, p.vel_amp, p.seed)
        rho = 1.0 + p.rho_amp * (2 * rng.random(g.shape) - 1)
        theta = p.theta_min + p.theta_bump * rng.random(g.shape)
        theta[rng.integers(g.nx), rng.integers(g.ny)] = p.theta_min
    else:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    return SimState(g, rho, vel, theta, np.zeros(g.shape), 0.0)
