"""Preconditioned Krylov solvers for the stencil systems.

The operators are assembled once per solve as CSR matrices; the Krylov
loops only need ``A @ x`` and a preconditioner callable, so a matrix-free
operator with a ``__matmul__`` works as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

METHODS = ("cg", "bicgstab")
PRECONDITIONERS = ("lu", "ilu", "jacobi", "none")


class SolverError(RuntimeError):
    """Raised when a linear solve misses its residual target."""


@dataclass(frozen=True)
class LinearSolverSpec:
    method: str = "bicgstab"
    tol: float = 1e-10
    max_iter: int = 1000
    preconditioner: str = "lu"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveInfo:
    iterations: int
    residual: float  # relative, ||b - A x|| / ||b||
    converged: bool


def jacobi(A: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    inv = 1.0 / A.diagonal()
    return lambda r: inv * r


def ilu(A: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    fact = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=15)
    return fact.solve


def lu(A: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    return spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A").solve


class FactorCache:
    """A sparse LU factor reused as preconditioner while it stays effective.

    Coefficients drift slowly between Picard sweeps and time steps, so a
    stale factor still preconditions well; it is refreshed as soon as a
    solve needs more than ``refresh_after`` iterations.
    """

    def __init__(self, refresh_after: int = 6):
        self.refresh_after = refresh_after
        self._solve = None
        self.factorizations = 0

    def psolve(self, A):
        if self._solve is None:
            self._solve = lu(A)
            self.factorizations += 1
        return self._solve

    def record(self, info: "SolveInfo") -> None:
        if info.iterations > self.refresh_after or not info.converged:
            self._solve = None

    def clear(self) -> None:
        self._solve = None


def make_preconditioner(A, kind: str):
    if kind == "lu":
        return lu(A)
    if kind == "ilu":
        return ilu(A)
    if kind == "jacobi":
        return jacobi(A)
    return lambda r: r


def cg(A, b, x0=None, tol=1e-10, max_iter=1000, psolve=None):
    """Preconditioned conjugate gradients for symmetric positive (semi)definite A."""
    psolve = psolve or (lambda r: r)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, True)
    r = b - A @ x
    z = psolve(r)
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        ap = A @ p
        pap = p @ ap
        if not pap > 0:
            break  # breakdown (indefinite or exhausted direction)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            res = np.linalg.norm(b - A @ x) / bnorm
            if res <= tol:
                return x, SolveInfo(k, res, True)
            r = b - A @ x
        z = psolve(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    return x, SolveInfo(max_iter, res, bool(res <= tol))


def bicgstab(A, b, x0=None, tol=1e-10, max_iter=1000, psolve=None):
    """Right-preconditioned BiCGSTAB for general nonsingular A."""
    psolve = psolve or (lambda r: r)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, True)
    r = b - A @ x
    if np.linalg.norm(r) / bnorm <= tol:
        return x, SolveInfo(0, np.linalg.norm(r) / bnorm, True)
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for k in range(1, max_iter + 1):
        rho = r_hat @ r
        if rho == 0.0:
            # breakdown: restart from the current iterate
            r_hat = r.copy()
            rho = r_hat @ r
            p[:] = 0.0
            v[:] = 0.0
            rho_old = alpha = omega = 1.0
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = psolve(p)
        v = A @ phat
        rv = r_hat @ v
        if rv == 0.0:
            break
        alpha = rho / rv
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x += alpha * phat
            res = np.linalg.norm(b - A @ x) / bnorm
            if res <= tol:
                return x, SolveInfo(k, res, True)
            r = b - A @ x
            rho_old = rho
            continue
        shat = psolve(s)
        t = A @ shat
        tt = t @ t
        if tt == 0.0:
            x += alpha * phat
            break
        omega = (t @ s) / tt
        x += alpha * phat + omega * shat
        r = s - omega * t
        rho_old = rho
        if np.linalg.norm(r) / bnorm <= tol:
            res = np.linalg.norm(b - A @ x) / bnorm
            if res <= tol:
                return x, SolveInfo(k, res, True)
            r = b - A @ x
    res = np.linalg.norm(b - A @ x) / bnorm
    return x, SolveInfo(max_iter, res, bool(res <= tol))


def solve(A, b, spec: LinearSolverSpec, x0=None, psolve=None, what: str = "linear system", cache: FactorCache | None = None):
    """Solve ``A x = b`` per ``spec``; raise SolverError if the target is missed."""
    use_cache = psolve is None and cache is not None and spec.preconditioner == "lu"
    if use_cache:
        psolve = cache.psolve(A)
    elif psolve is None:
        psolve = make_preconditioner(A, spec.preconditioner)
    fn = cg if spec.method == "cg" else bicgstab
    # work with a unit right-hand side: decaying fields would otherwise
    # push the Krylov scalars into the subnormal range
    # (max-abs, since the 2-norm itself underflows for entries below ~1e-154)
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        scale = 1.0
    b = b / scale
    x0 = None if x0 is None else x0 / scale
    x, info = fn(A, b, x0=x0, tol=spec.tol, max_iter=spec.max_iter, psolve=psolve)
    if use_cache:
        cache.record(info)
        if not info.converged:
            # retry once with a fresh factor before giving up
            x, info = fn(A, b, x0=x0, tol=spec.tol, max_iter=spec.max_iter, psolve=cache.psolve(A))
    x = x * scale
    if not info.converged or not np.all(np.isfinite(x)):
        raise SolverError(
            f"{what}: {spec.method} stopped at relative residual {info.residual:.3e} "
            f"after {info.iterations} iterations (target {spec.tol:.1e})"
        )
    return x, info
