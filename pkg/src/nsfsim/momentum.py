"""Implicit variable-viscosity momentum step and variable-density projection.

The viscous operator is the negative gradient of the discrete dissipation
functional

    Phi(w) = sum_cells A nu_c (D11^2 + D22^2) + sum_nodes 2 A w_n nu_n D12^2,

with ``w_n`` the node area weights (1/2 on walls).  Writing the strain map as a
sparse matrix ``S``, the operator is ``L = -(1/A) S^T W S``, so
``A <w, L w> = -Phi(w)`` holds exactly and the dissipation handed to the
heat equation by :func:`viscous_work` is the energy the momentum step
removes.  For constant viscosity ``L`` reduces to ``nu/2`` times the MAC
Laplacian with mirrored no-slip ghosts.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, VectorField, cell_to_faces, cell_to_node, divergence, sym_gradient
from .linsolve import FactorCache, LinearSolverSpec, SolverError, solve
from .state import MaterialLaw, SimState, viscosity
from .transport import mass_flux, momentum_advection_matrix

MOMENTUM_SPEC = LinearSolverSpec("bicgstab", 1e-10, 1000)
POISSON_SPEC = LinearSolverSpec("cg", 1e-12, 2000)


def _nu_weights(nu: np.ndarray, g: Grid) -> np.ndarray:
    A = g.cell_area
    nu_n = cell_to_node(nu, g).ravel()
    wn = g._ops.node_weights
    nc = nu.ravel()
    return A * np.concatenate([nc, nc, 2.0 * wn * nu_n])


def viscous_matrix(nu: np.ndarray, g: Grid) -> sp.csr_matrix:
    """Sparse div(nu D(w)) on interior velocity unknowns (symmetric, negative semidefinite)."""
    if nu.shape != g.shape:
        raise ValueError("viscosity field must live on cells")
    S = g._ops.strain
    W = sp.diags(_nu_weights(nu, g))
    return (-(S.T @ W @ S) / g.cell_area).tocsr()


def viscous_work(vel: VectorField, nu_field: np.ndarray, g: Grid) -> tuple[np.ndarray, float]:
    """Cellwise dissipation density nu D:D and its domain integral.

    Node (shear) contributions are shared equally among the cells touching
    the node, so the integral equals ``-A <vel, L vel>`` with ``L`` from
    :func:`viscous_matrix`.
    """
    vel.check(g)
    D = sym_gradient(vel.zero_walls(), g)
    nu_n = cell_to_node(nu_field, g)
    shear = 2.0 * nu_n * D.xy**2
    density = nu_field * (D.xx**2 + D.yy**2)
    density = density + 0.25 * (shear[:-1, :-1] + shear[1:, :-1] + shear[:-1, 1:] + shear[1:, 1:])
    return density, float(np.sum(density)) * g.cell_area


def viscous_power(vel: VectorField, nu_field: np.ndarray, g: Grid) -> float:
    """A <vel, div(nu D(vel))>: the rate of kinetic-energy change due to viscosity."""
    x = vel.interior()
    return float(x @ (viscous_matrix(nu_field, g) @ x)) * g.cell_area


def kinetic_energy(rho: np.ndarray, vel: VectorField, g: Grid) -> float:
    """sum over faces of rho_face |w|^2 / 2 * A, face densities arithmetic means."""
    x = vel.interior()
    rf = cell_to_faces(rho, g).interior()
    return 0.5 * float(np.sum(rf * x * x)) * g.cell_area


def l2_norm(vel: VectorField, g: Grid) -> float:
    return float(np.sqrt((np.sum(vel.u**2) + np.sum(vel.v**2)) * g.cell_area))


@dataclass
class MomentumSystem:
    """The assembled linear system of one momentum step (kept for diagnostics)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    viscous: sp.csr_matrix


def assemble_momentum(rho_old, rho_new, vel_old: VectorField, flux: VectorField, nu, dt, g: Grid, forcing=None):
    """(rho_new_f/dt + Adv_up(G) - L) w = rho_old_f w_old / dt + f."""
    L = viscous_matrix(nu, g)
    adv = momentum_advection_matrix(flux, g)
    rf_new = cell_to_faces(rho_new, g).interior()
    rf_old = cell_to_faces(rho_old, g).interior()
    M = (sp.diags(rf_new / dt) + adv - L).tocsr()
    rhs = rf_old * vel_old.interior() / dt
    if forcing is not None:
        rhs = rhs + forcing.interior()
    return MomentumSystem(M, rhs, L)


def momentum_step(
    s: SimState,
    lag_vel: VectorField,
    lag_theta: np.ndarray,
    dt: float,
    law: MaterialLaw,
    spec: LinearSolverSpec = MOMENTUM_SPEC,
    *,
    rho_new: np.ndarray | None = None,
    flux: VectorField | None = None,
    forcing: VectorField | None = None,
    cache: FactorCache | None = None,
) -> VectorField:
    """Implicit linearised momentum step; returns the unprojected velocity.

    Viscosity is frozen at ``lag_theta`` and advection uses the mass flux of
    ``lag_vel``, upwinded in the unknown.  ``forcing`` adds a body force
    (used by manufactured-solution tests).
    """
    g = s.grid
    if np.min(s.rho) <= 0:
        raise ValueError("density must be positive")
    F = mass_flux(s.rho, lag_vel, g) if flux is None else flux
    if rho_new is None:
        rho_new = s.rho - dt * divergence(F, g)
    nu = viscosity(lag_theta, law)
    sysm = assemble_momentum(s.rho, rho_new, s.vel, F, nu, dt, g, forcing)
    x_old = s.vel.interior()
    b = sysm.rhs - sysm.matrix @ x_old
    dx, _ = solve(sysm.matrix, b, spec, what="momentum step", cache=cache)
    return VectorField.from_interior(x_old + dx, g)


# -- projection ----------------------------------------------------------------
_POISSON_PRECOND: dict[Grid, object] = {}


def _pinned(A: sp.csr_matrix) -> sp.csr_matrix:
    return A[1:, 1:].tocsc()


def poisson_matrix(rho: np.ndarray, g: Grid) -> sp.csr_matrix:
    """-div((1/rho_face) grad .) with Neumann closure (symmetric positive semidefinite)."""
    ops = g._ops
    inv = 1.0 / cell_to_faces(rho, g).interior()
    return (ops.grad.T @ sp.diags(inv) @ ops.grad).tocsr()


def _poisson_preconditioner(g: Grid):
    lu = _POISSON_PRECOND.get(g)
    if lu is None:
        lu = spla.splu(_pinned(poisson_matrix(np.ones(g.shape), g)))
        _POISSON_PRECOND[g] = lu
    return lu.solve


@dataclass
class ProjectionInfo:
    compatibility: float  # mean of div(vstar); vanishes for wall-compatible input
    iterations: int
    residual: float
    max_div: float


def project(
    vstar: VectorField,
    rho: np.ndarray,
    dt: float,
    spec: LinearSolverSpec = POISSON_SPEC,
    g: Grid | None = None,
    return_info: bool = False,
):
    """Variable-density projection: v = vstar - (dt/rho) grad(phi).

    Solves div((1/rho) grad phi) = div(vstar)/dt with homogeneous Neumann
    data; ``phi`` is returned as the pressure with zero mean.
    """
    if g is None:
        g = Grid(rho.shape[0], rho.shape[1])
    vstar.check(g)
    w = vstar.zero_walls()
    b = divergence(w, g).ravel() / dt
    compat = float(np.mean(b)) * dt
    b = b - np.mean(b)
    A = poisson_matrix(rho, g)
    phi = np.zeros(g.n_cells)
    it, res = 0, 0.0
    if np.any(b != 0.0):
        # pin cell 0: the remaining rows are SPD and imply the dropped one
        x, info = solve(_pinned(A).tocsr(), -b[1:], spec, psolve=_poisson_preconditioner(g), what="pressure Poisson")
        phi[1:] = x
        it, res = info.iterations, info.residual
    phi -= np.mean(phi)
    inv = 1.0 / cell_to_faces(rho, g).interior()
    x = w.interior() - dt * inv * (g._ops.grad @ phi)
    vel = VectorField.from_interior(x, g)
    pi = phi.reshape(g.shape)
    if return_info:
        md = float(np.max(np.abs(divergence(vel, g))))
        return vel, pi, ProjectionInfo(compat, it, res, md)
    return vel, pi


# -- Stokes semigroup ----------------------------------------------------------
def stokes_semigroup_fields(v0: VectorField, nu: float, dt: float, n_steps: int, g: Grid) -> Iterator[VectorField]:
    """Yield S(t_k), k = 0..n_steps, for constant-coefficient Stokes with rho = 1.

    Each step is one implicit viscous solve followed by the projection; the
    two constant matrices are factorised once.
    """
    v0.check(g)
    L = viscous_matrix(np.full(g.shape, float(nu)), g)
    M = (sp.identity(g.n_vel) / dt - L).tocsc()
    lu_m = spla.splu(M)
    P = poisson_matrix(np.ones(g.shape), g)
    lu_p = spla.splu(_pinned(P))
    grad = g._ops.grad
    x = v0.zero_walls().interior()
    yield VectorField.from_interior(x.copy(), g)
    for _ in range(n_steps):
        xs = x + lu_m.solve(-(M @ x) + x / dt)
        b = (g._ops.div @ xs) / dt
        b -= np.mean(b)
        phi = np.zeros(g.n_cells)
        phi[1:] = lu_p.solve(-b[1:])
        x = xs - dt * (grad @ phi)
        yield VectorField.from_interior(x.copy(), g)


def stokes_semigroup_run(v0: VectorField, nu: float, dt: float, n_steps: int, g: Grid) -> np.ndarray:
    """L2 norms of the homogeneous Stokes evolution at t = 0, dt, ..., n_steps dt."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    return np.array([l2_norm(w, g) for w in stokes_semigroup_fields(v0, nu, dt, n_steps, g)])


__all__ = [
    "MOMENTUM_SPEC",
    "POISSON_SPEC",
    "SolverError",
    "kinetic_energy",
    "l2_norm",
    "momentum_step",
    "project",
    "stokes_semigroup_fields",
    "stokes_semigroup_run",
    "viscous_matrix",
    "viscous_power",
    "viscous_work",
]
