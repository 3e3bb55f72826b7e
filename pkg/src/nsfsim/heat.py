"""Implicit linearised temperature step and the Neumann heat semigroup.

The step solves

    (rho_new theta - rho_old theta_old) / dt + div(F theta_up) - div(kappa grad theta) = q

with the mass flux ``F`` of the density update, so that ``sum(rho theta)``
changes by exactly ``dt * sum(q)``.  The system matrix is a column- and
row-diagonally dominant Z-matrix (an M-matrix): with ``q >= 0`` the new
minimum cannot drop below the old one.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, VectorField, diffusion_matrix, divergence
from .linsolve import FactorCache, LinearSolverSpec, solve
from .momentum import viscous_work
from .state import MaterialLaw, SimState, conductivity, viscosity
from .transport import cell_advection_matrix, mass_flux

HEAT_SPEC = LinearSolverSpec("bicgstab", 1e-12, 1000)


def assemble_heat(rho_new, flux: VectorField, kappa, dt, g: Grid) -> sp.csr_matrix:
    K = diffusion_matrix(kappa, g, "neumann")
    return (sp.diags(rho_new.ravel() / dt) + cell_advection_matrix(flux, g) - K).tocsr()


def heat_step(
    s: SimState,
    lag_vel: VectorField,
    lag_theta: np.ndarray,
    new_vel: VectorField,
    dt: float,
    law: MaterialLaw,
    spec: LinearSolverSpec = HEAT_SPEC,
    *,
    rho_new: np.ndarray | None = None,
    flux: VectorField | None = None,
    source: np.ndarray | None = None,
    cache: FactorCache | None = None,
) -> np.ndarray:
    """Implicit temperature update with conductivity frozen at ``lag_theta``.

    The source defaults to the dissipation of ``new_vel`` with viscosity
    nu(lag_theta); ``source`` overrides it.
    """
    g = s.grid
    F = mass_flux(s.rho, lag_vel, g) if flux is None else flux
    if rho_new is None:
        rho_new = s.rho - dt * divergence(F, g)
    if source is None:
        source, _ = viscous_work(new_vel, viscosity(lag_theta, law), g)
    kappa = conductivity(lag_theta, law)
    M = assemble_heat(rho_new, F, kappa, dt, g)
    t_old = s.theta.ravel()
    b = (s.rho.ravel() * t_old) / dt + source.ravel() - M @ t_old
    d, _ = solve(M, b, spec, what="heat step", cache=cache)
    return (t_old + d).reshape(g.shape)


def heat_semigroup_fields(e0: np.ndarray, kappa: float, dt: float, n_steps: int, g: Grid) -> Iterator[np.ndarray]:
    """Yield E(t_k) for E_t = kappa Lap E, Neumann walls, implicit Euler."""
    if e0.shape != g.shape:
        raise ValueError("initial field must live on cells")
    K = diffusion_matrix(np.full(g.shape, float(kappa)), g, "neumann")
    M = (sp.identity(g.n_cells) / dt - K).tocsc()
    lu = spla.splu(M)
    e = e0.ravel().astype(float)
    yield e.reshape(g.shape).copy()
    for _ in range(n_steps):
        e = e + lu.solve(K @ e)
        yield e.reshape(g.shape).copy()


def heat_semigroup_run(e0: np.ndarray, kappa: float, dt: float, n_steps: int, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    """L2 norm and spatial mean of E at t = 0, dt, ..., n_steps dt."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    norms, means = [], []
    for e in heat_semigroup_fields(e0, kappa, dt, n_steps, g):
        norms.append(float(np.sqrt(np.sum(e * e) * g.cell_area)))
        means.append(float(np.mean(e)))
    return np.array(norms), np.array(means)
