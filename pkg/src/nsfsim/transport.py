"""First-order upwind finite-volume transport.

Every advective operator in the solver is built from the same upwind
mass flux ``F = rho_upwind * a`` on cell faces.  The density update is
``rho_new = rho - dt * div F``; the temperature and momentum operators use
``F`` (or its average onto the momentum control volumes), so the discrete
continuity equation is satisfied exactly by every transported quantity.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import Grid, VectorField, cell_to_faces, divergence


class CFLError(ValueError):
    pass


def mass_flux(rho: np.ndarray, adv: VectorField, g: Grid) -> VectorField:
    """Upwind mass flux on faces; zero on walls."""
    adv.check(g)
    fu = np.zeros(g.u_shape)
    a = adv.u[1:-1, :]
    fu[1:-1, :] = np.where(a > 0, rho[:-1, :], rho[1:, :]) * a
    fv = np.zeros(g.v_shape)
    b = adv.v[:, 1:-1]
    fv[:, 1:-1] = np.where(b > 0, rho[:, :-1], rho[:, 1:]) * b
    return VectorField(fu, fv)


def outflow_cfl(adv: VectorField, dt: float, g: Grid) -> float:
    """max over cells of dt * (sum of outgoing face speeds / spacing).

    At most 1 makes the upwind update a convex combination of old values.
    """
    u, v = adv.u, adv.v
    out = (np.maximum(u[1:, :], 0) + np.maximum(-u[:-1, :], 0)) / g.hx
    out += (np.maximum(v[:, 1:], 0) + np.maximum(-v[:, :-1], 0)) / g.hy
    return float(dt * np.max(out))


def transport_density(rho: np.ndarray, adv: VectorField, dt: float, g: Grid, flux: VectorField | None = None) -> np.ndarray:
    """One explicit upwind step of rho_t + div(rho a) = 0."""
    cfl = outflow_cfl(adv, dt, g)
    if cfl > 1.0:
        raise CFLError(f"outflow CFL number {cfl:.3f} exceeds 1")
    F = mass_flux(rho, adv, g) if flux is None else flux
    return rho - dt * divergence(F, g)


# -- sparse upwind operators ---------------------------------------------------
def _upwind_matrix(a, b, G, h, n):
    """Matrix of w -> sum over connections of +-G * w_upwind / h.

    Connection k carries flux G[k] from unknown a[k] to unknown b[k]; an index
    of -1 stands for a wall value held at zero.
    """
    a, b, G = a.ravel(), b.ravel(), G.ravel()
    h = np.broadcast_to(np.asarray(h, dtype=float), G.shape).ravel()
    pos = G > 0
    up = np.where(pos, a, b)
    c = G / h
    rows = np.concatenate([a, b])
    cols = np.concatenate([up, up])
    vals = np.concatenate([c, -c])
    keep = (rows >= 0) & (cols >= 0) & (vals != 0)
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))


def _net_outflow(a, b, G, h, n):
    a, b, c = a.ravel(), b.ravel(), (G / h).ravel()
    out = np.zeros(n + 1)
    np.add.at(out, a, c)
    np.add.at(out, b, -c)
    return out[:n]  # index -1 (wall) lands in the spare last slot


def _cell_connections(F: VectorField, g: Grid):
    idx = np.arange(g.n_cells).reshape(g.shape)
    a = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
    b = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
    G = np.concatenate([F.u[1:-1, :].ravel(), F.v[:, 1:-1].ravel()])
    h = np.concatenate([np.full((g.nx - 1) * g.ny, g.hx), np.full(g.nx * (g.ny - 1), g.hy)])
    return a, b, G, h


def cell_advection_matrix(F: VectorField, g: Grid) -> sp.csr_matrix:
    """Conservative upwind operator s -> div(F s_upwind) on cells."""
    a, b, G, h = _cell_connections(F, g)
    return _upwind_matrix(a, b, G, h, g.n_cells)


def _velocity_index(g: Grid):
    """Unknown index of every u- and v-face (-1 on walls)."""
    nu = (g.nx - 1) * g.ny
    iu = -np.ones(g.u_shape, dtype=np.int64)
    iu[1:-1, :] = np.arange(nu).reshape(g.nx - 1, g.ny)
    iv = -np.ones(g.v_shape, dtype=np.int64)
    iv[:, 1:-1] = nu + np.arange(g.nx * (g.ny - 1)).reshape(g.nx, g.ny - 1)
    return iu, iv


def _momentum_connections(F: VectorField, g: Grid):
    """Control-volume faces of the staggered momentum cells and their fluxes.

    The flux through a momentum control-volume face is the average of the
    two cell mass fluxes it straddles, which makes the face densities
    (arithmetic means of cell densities) obey the discrete continuity
    equation on the staggered control volumes.
    """
    iu, iv = _velocity_index(g)
    Fx, Fy = F.u, F.v
    parts = []
    # u-volumes, x-direction: faces at cell centres between u[c] and u[c+1]
    parts.append((iu[:-1, :], iu[1:, :], 0.5 * (Fx[:-1, :] + Fx[1:, :]), g.hx))
    # u-volumes, y-direction: faces at interior nodes between u[i, j-1] and u[i, j]
    parts.append((iu[1:-1, :-1], iu[1:-1, 1:], 0.5 * (Fy[:-1, 1:-1] + Fy[1:, 1:-1]), g.hy))
    # v-volumes, y-direction: faces at cell centres between v[i, c] and v[i, c+1]
    parts.append((iv[:, :-1], iv[:, 1:], 0.5 * (Fy[:, :-1] + Fy[:, 1:]), g.hy))
    # v-volumes, x-direction: faces at interior nodes between v[i-1, j] and v[i, j]
    parts.append((iv[:-1, 1:-1], iv[1:, 1:-1], 0.5 * (Fx[1:-1, :-1] + Fx[1:-1, 1:]), g.hx))
    a = np.concatenate([p[0].ravel() for p in parts])
    b = np.concatenate([p[1].ravel() for p in parts])
    G = np.concatenate([p[2].ravel() for p in parts])
    h = np.concatenate([np.full(p[2].size, p[3]) for p in parts])
    return a, b, G, h


def momentum_advection_matrix(F: VectorField, g: Grid) -> sp.csr_matrix:
    """Conservative upwind operator w -> div(G w_upwind) on interior velocity unknowns."""
    a, b, G, h = _momentum_connections(F, g)
    return _upwind_matrix(a, b, G, h, g.n_vel)


def momentum_flux_divergence(F: VectorField, g: Grid) -> np.ndarray:
    """div(G) on each momentum control volume (interior unknown ordering)."""
    a, b, G, h = _momentum_connections(F, g)
    return _net_outflow(a, b, G, h, g.n_vel)


def advect_scalar(s: np.ndarray, rho: np.ndarray, adv: VectorField, g: Grid) -> np.ndarray:
    """Upwind rho (a . grad) s at cell centres, as div(F s_up) - s div F."""
    if s.shape != g.shape or rho.shape != g.shape:
        raise ValueError("scalar fields must match the grid")
    F = mass_flux(rho, adv, g)
    out = cell_advection_matrix(F, g) @ s.ravel()
    return out.reshape(g.shape) - s * divergence(F, g)


def advect_velocity(w: VectorField, rho: np.ndarray, adv: VectorField, g: Grid) -> VectorField:
    """Face-wise upwind rho (a . grad) w on interior faces; walls get zero."""
    w.check(g)
    if rho.shape != g.shape:
        raise ValueError("density must match the grid")
    F = mass_flux(rho, adv, g)
    x = w.interior()
    out = momentum_advection_matrix(F, g) @ x - x * momentum_flux_divergence(F, g)
    return VectorField.from_interior(out, g)


def face_density(rho: np.ndarray, g: Grid) -> np.ndarray:
    """Arithmetic face densities in interior-unknown ordering."""
    return cell_to_faces(rho, g).interior()
