"""Manufactured solutions for the convergence study.

The exact fields are linear in time, so implicit Euler carries no time
error and the measured error is purely spatial.  Advection is switched off
(the density is then frozen); the pressure is zero, so the projection only
removes the discrete divergence of the momentum update.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .grid import Grid, VectorField
from .picard import Workspace, advance
from .state import MaterialLaw, SimState

_x, _y, _t = sp.symbols("x y t", real=True)


@dataclass(frozen=True)
class Manufactured:
    theta_min: float = 1.0
    theta_amp: float = 0.5
    rho_amp: float = 0.1
    vel_amp: float = 1.0
    m: float = 1.0
    l: float = 1.0  # noqa: E741  (conductivity exponent)

    @property
    def law(self) -> MaterialLaw:
        return MaterialLaw(self.m, self.l, self.theta_min)


@lru_cache(maxsize=8)
def _symbolic(mf: Manufactured):
    pi = sp.pi
    x, y, t = _x, _y, _t
    psi = mf.vel_amp * (1 + t) * sp.sin(pi * x) ** 2 * sp.sin(pi * y) ** 2 / pi
    u = sp.diff(psi, y)
    v = -sp.diff(psi, x)
    theta = mf.theta_min + mf.theta_amp * (1 + t) * (1 + sp.cos(pi * x) * sp.cos(pi * y))
    rho = 1 + mf.rho_amp * sp.cos(pi * x) * sp.cos(pi * y)
    nu = theta**mf.m
    kappa = (1 + theta) ** mf.l
    D11 = sp.diff(u, x)
    D22 = sp.diff(v, y)
    D12 = (sp.diff(u, y) + sp.diff(v, x)) / 2
    fx = rho * sp.diff(u, t) - (sp.diff(nu * D11, x) + sp.diff(nu * D12, y))
    fy = rho * sp.diff(v, t) - (sp.diff(nu * D12, x) + sp.diff(nu * D22, y))
    diss = nu * (D11**2 + D22**2 + 2 * D12**2)
    q = rho * sp.diff(theta, t) - sp.diff(kappa * sp.diff(theta, x), x) - sp.diff(kappa * sp.diff(theta, y), y) - diss
    args = (x, y, t)
    return {k: sp.lambdify(args, e, "numpy") for k, e in dict(u=u, v=v, theta=theta, rho=rho, fx=fx, fy=fy, q=q).items()}


def _eval(fn, X, Y, t) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(X, Y, t), dtype=float), X.shape).copy()


def exact_state(mf: Manufactured, g: Grid, t: float) -> SimState:
    f = _symbolic(mf)
    Xc, Yc = g.cell_mesh()
    Xu, Yu = g.u_mesh()
    Xv, Yv = g.v_mesh()
    vel = VectorField(_eval(f["u"], Xu, Yu, t), _eval(f["v"], Xv, Yv, t)).zero_walls()
    return SimState(g, _eval(f["rho"], Xc, Yc, t), vel, _eval(f["theta"], Xc, Yc, t), np.zeros(g.shape), t)


def forcing(mf: Manufactured, g: Grid):
    f = _symbolic(mf)
    Xc, Yc = g.cell_mesh()
    Xu, Yu = g.u_mesh()
    Xv, Yv = g.v_mesh()

    def body(t):
        return VectorField(_eval(f["fx"], Xu, Yu, t), _eval(f["fy"], Xv, Yv, t)).zero_walls()

    def heat(t):
        return _eval(f["q"], Xc, Yc, t)

    return body, heat


@dataclass
class MMSResult:
    n: int
    err_u: float  # discrete L2 error of the face velocities
    err_theta: float
    max_div: float
    sweeps: int


def run_mms(mf: Manufactured, n: int, dt: float = 0.025, t_end: float = 0.1, tol: float = 1e-10) -> MMSResult:
    g = Grid(n, n)
    s = exact_state(mf, g, 0.0)
    body, heat = forcing(mf, g)
    law = mf.law
    ws = Workspace()
    steps = int(round(t_end / dt))
    max_div, sweeps = 0.0, 0
    for _ in range(steps):
        s, rep = advance(s, dt, law, tol=tol, workspace=ws, body_force=body, heat_source=heat, advect=False)
        max_div = max(max_div, rep.max_div)
        sweeps = max(sweeps, rep.sweeps)
    ex = exact_state(mf, g, s.time)
    A = g.cell_area
    du = s.vel - ex.vel
    eu = float(np.sqrt((np.sum(du.u**2) + np.sum(du.v**2)) * A))
    et = float(np.sqrt(np.sum((s.theta - ex.theta) ** 2) * A))
    return MMSResult(n, eu, et, max_div, sweeps)


def observed_orders(results: list[MMSResult]) -> tuple[list[float], list[float]]:
    """log2 error ratios between consecutive refinements (grids doubling)."""
    ou, ot = [], []
    for a, b in zip(results[:-1], results[1:]):
        r = np.log(b.n / a.n)
        ou.append(float(np.log(a.err_u / b.err_u) / r))
        ot.append(float(np.log(a.err_theta / b.err_theta) / r))
    return ou, ot
