"""MAC staggered grid on the rectangle [0, lx] x [0, ly].

Scalars (density, temperature, pressure) live at cell centres in arrays of
shape ``(nx, ny)`` indexed ``[i, j]`` with ``i`` along x.  The x-velocity
lives on vertical faces, shape ``(nx + 1, ny)``; the y-velocity on
horizontal faces, shape ``(nx, ny + 1)``.  The first and last face in the
normal direction are wall faces and carry zero normal velocity.

The strain-rate tensor keeps its diagonal at cell centres and its single
off-diagonal entry at cell corners (nodes), where the centred differences
of the MAC layout are naturally second order.  Wall nodes use the
mirrored-ghost closure of the no-slip condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

BOUNDARY_KINDS = ("neumann", "dirichlet")


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def u_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def v_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_vel(self) -> int:
        """Number of interior (unknown) velocity faces."""
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    # coordinates -----------------------------------------------------------
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    def y_faces(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def cell_mesh(self):
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def u_mesh(self):
        return np.meshgrid(self.x_faces(), self.y_centers(), indexing="ij")

    def v_mesh(self):
        return np.meshgrid(self.x_centers(), self.y_faces(), indexing="ij")

    def node_mesh(self):
        return np.meshgrid(self.x_faces(), self.y_faces(), indexing="ij")

    def node_weights(self) -> np.ndarray:
        """Fraction of a cell area owned by each node (1 inside, 1/2 on walls, 1/4 at corners)."""
        wx = np.ones(self.nx + 1)
        wx[[0, -1]] = 0.5
        wy = np.ones(self.ny + 1)
        wy[[0, -1]] = 0.5
        return np.outer(wx, wy)

    # cached sparse operators -------------------------------------------------
    @cached_property
    def _ops(self) -> "_GridOperators":
        return _GridOperators(self)


@dataclass
class VectorField:
    """Face-centred velocity: ``u`` on vertical faces, ``v`` on horizontal faces."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, g: Grid) -> "VectorField":
        return cls(np.zeros(g.u_shape), np.zeros(g.v_shape))

    def copy(self) -> "VectorField":
        return VectorField(self.u.copy(), self.v.copy())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u - other.u, self.v - other.v)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.u * c, self.v * c)

    __rmul__ = __mul__

    def check(self, g: Grid) -> None:
        if self.u.shape != g.u_shape or self.v.shape != g.v_shape:
            raise ValueError(f"velocity shapes {self.u.shape}, {self.v.shape} do not match grid {g.u_shape}, {g.v_shape}")

    def wall_normal_max(self) -> float:
        return max(
            float(np.max(np.abs(self.u[[0, -1], :]))),
            float(np.max(np.abs(self.v[:, [0, -1]]))),
        )

    def zero_walls(self) -> "VectorField":
        """Return a copy with the wall-normal components set to zero."""
        w = self.copy()
        w.u[[0, -1], :] = 0.0
        w.v[:, [0, -1]] = 0.0
        return w

    def interior(self) -> np.ndarray:
        """Flatten the interior faces into the solver unknown vector."""
        return np.concatenate([self.u[1:-1, :].ravel(), self.v[:, 1:-1].ravel()])

    @classmethod
    def from_interior(cls, x: np.ndarray, g: Grid) -> "VectorField":
        nu = (g.nx - 1) * g.ny
        w = cls.zeros(g)
        w.u[1:-1, :] = x[:nu].reshape(g.nx - 1, g.ny)
        w.v[:, 1:-1] = x[nu:].reshape(g.nx, g.ny - 1)
        return w

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.u))), float(np.max(np.abs(self.v))))


@dataclass
class TensorField:
    """Symmetric 2x2 tensor: diagonal at cell centres, off-diagonal at nodes."""

    xx: np.ndarray
    yy: np.ndarray
    xy: np.ndarray

    @property
    def yx(self) -> np.ndarray:
        return self.xy

    def xy_at_centers(self) -> np.ndarray:
        c = self.xy
        return 0.25 * (c[:-1, :-1] + c[1:, :-1] + c[:-1, 1:] + c[1:, 1:])

    def at_centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """The four components (xx, xy, yx, yy) sampled at cell centres."""
        xy = self.xy_at_centers()
        return self.xx, xy, xy, self.yy


def _check_scalar(s: np.ndarray, g: Grid, name: str = "field") -> None:
    if np.shape(s) != g.shape:
        raise ValueError(f"{name} has shape {np.shape(s)}, grid expects {g.shape}")


# -- 1D building blocks ------------------------------------------------------
def _face_to_cell_diff(n: int, h: float) -> sp.csr_matrix:
    """(n, n-1): cell i <- (f[i+1] - f[i]) / h over interior faces 1..n-1."""
    d = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [0, -1], shape=(n, n - 1))
    return (d / h).tocsr()


def _cell_to_face_diff(n: int, h: float) -> sp.csr_matrix:
    """(n-1, n): interior face k (between cells k-1, k) <- (c[k] - c[k-1]) / h."""
    d = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))
    return (d / h).tocsr()


def _node_diff_ghost(n: int, h: float) -> sp.csr_matrix:
    """(n+1, n): node k <- (c[k] - c[k-1]) / h with odd ghost values at both ends."""
    rows, cols, vals = [], [], []
    for k in range(1, n):
        rows += [k, k]
        cols += [k, k - 1]
        vals += [1.0, -1.0]
    rows += [0, n]
    cols += [0, n - 1]
    vals += [2.0, -2.0]
    return sp.csr_matrix((np.array(vals) / h, (rows, cols)), shape=(n + 1, n))


def _interior_to_node_select(n: int) -> sp.csr_matrix:
    """(n+1, n-1): place interior face k (1..n-1) at node k; wall nodes get 0."""
    return sp.csr_matrix((np.ones(n - 1), (np.arange(1, n), np.arange(n - 1))), shape=(n + 1, n - 1))


class _GridOperators:
    """Sparse matrices shared by every solve on one grid."""

    def __init__(self, g: Grid):
        nx, ny, hx, hy = g.nx, g.ny, g.hx, g.hy
        ix, iy = sp.identity(nx, format="csr"), sp.identity(ny, format="csr")
        nu_int = (nx - 1) * ny
        # strain components from interior velocity unknowns
        d11 = sp.kron(_face_to_cell_diff(nx, hx), iy)
        d22 = sp.kron(ix, _face_to_cell_diff(ny, hy))
        dyu = sp.kron(_interior_to_node_select(nx), _node_diff_ghost(ny, hy))
        dxv = sp.kron(_node_diff_ghost(nx, hx), _interior_to_node_select(ny))
        zc_v = sp.csr_matrix((nx * ny, nx * (ny - 1)))
        zc_u = sp.csr_matrix((nx * ny, nu_int))
        self.strain = sp.bmat([[d11, zc_v], [zc_u, d22], [0.5 * dyu, 0.5 * dxv]], format="csr")
        self.n_cells = nx * ny
        self.n_nodes = (nx + 1) * (ny + 1)
        # cell -> interior face gradient and its negative adjoint, the divergence
        gx = sp.kron(_cell_to_face_diff(nx, hx), iy)
        gy = sp.kron(ix, _cell_to_face_diff(ny, hy))
        self.grad = sp.vstack([gx, gy], format="csr")
        self.div = (-self.grad.T).tocsr()
        self.node_weights = g.node_weights().ravel()


# -- operators -----------------------------------------------------------------
def divergence(w: VectorField, g: Grid) -> np.ndarray:
    """Cell-centred divergence from face differences."""
    w.check(g)
    return (w.u[1:, :] - w.u[:-1, :]) / g.hx + (w.v[:, 1:] - w.v[:, :-1]) / g.hy


def gradient(s: np.ndarray, g: Grid) -> VectorField:
    """Cell-to-face centred gradient; wall faces receive zero."""
    _check_scalar(s, g)
    w = VectorField.zeros(g)
    w.u[1:-1, :] = (s[1:, :] - s[:-1, :]) / g.hx
    w.v[:, 1:-1] = (s[:, 1:] - s[:, :-1]) / g.hy
    return w


def _tangential_node_diffs(w: VectorField, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    """d(u)/dy and d(v)/dx at nodes, using u = 0 / v = 0 ghost mirrors at walls."""
    dudy = np.empty(g.node_shape)
    dudy[:, 1:-1] = (w.u[:, 1:] - w.u[:, :-1]) / g.hy
    dudy[:, 0] = 2.0 * w.u[:, 0] / g.hy
    dudy[:, -1] = -2.0 * w.u[:, -1] / g.hy
    dvdx = np.empty(g.node_shape)
    dvdx[1:-1, :] = (w.v[1:, :] - w.v[:-1, :]) / g.hx
    dvdx[0, :] = 2.0 * w.v[0, :] / g.hx
    dvdx[-1, :] = -2.0 * w.v[-1, :] / g.hx
    return dudy, dvdx


def sym_gradient(w: VectorField, g: Grid) -> TensorField:
    """Strain rate D(w) = (grad w + grad w^T) / 2."""
    w.check(g)
    dudx = (w.u[1:, :] - w.u[:-1, :]) / g.hx
    dvdy = (w.v[:, 1:] - w.v[:, :-1]) / g.hy
    dudy, dvdx = _tangential_node_diffs(w, g)
    return TensorField(dudx, dvdy, 0.5 * (dudy + dvdx))


def cell_to_node(s: np.ndarray, g: Grid) -> np.ndarray:
    """Average a cell field onto nodes using the cells that touch each node."""
    _check_scalar(s, g)
    pad = np.zeros((g.nx + 2, g.ny + 2))
    cnt = np.zeros_like(pad)
    pad[1:-1, 1:-1] = s
    cnt[1:-1, 1:-1] = 1.0
    total = pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:]
    count = cnt[:-1, :-1] + cnt[1:, :-1] + cnt[:-1, 1:] + cnt[1:, 1:]
    return total / count


def cell_to_faces(s: np.ndarray, g: Grid) -> VectorField:
    """Arithmetic face averages; wall faces copy the adjacent cell."""
    _check_scalar(s, g)
    fu = np.empty(g.u_shape)
    fu[1:-1] = 0.5 * (s[1:] + s[:-1])
    fu[0], fu[-1] = s[0], s[-1]
    fv = np.empty(g.v_shape)
    fv[:, 1:-1] = 0.5 * (s[:, 1:] + s[:, :-1])
    fv[:, 0], fv[:, -1] = s[:, 0], s[:, -1]
    return VectorField(fu, fv)


def harmonic_face_coefficients(coeff: np.ndarray, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic means of ``coeff`` on interior x-faces and y-faces."""
    a, b = coeff[1:, :], coeff[:-1, :]
    cx = 2.0 * a * b / (a + b)
    a, b = coeff[:, 1:], coeff[:, :-1]
    cy = 2.0 * a * b / (a + b)
    return cx, cy


def diffusion_matrix(coeff: np.ndarray, g: Grid, bc: str = "neumann") -> sp.csr_matrix:
    """Sparse matrix of s -> div(coeff grad s) on the C-ordered cell vector.

    Neumann closure gives zero row and column sums; Dirichlet closure imposes
    s = 0 on the wall through an odd ghost cell with the adjacent coefficient.
    The negative of the matrix is an M-matrix in both cases.
    """
    _check_scalar(coeff, g, "coefficient")
    if bc not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {bc!r}")
    if not np.all(coeff > 0):
        raise ValueError("diffusion coefficient must be strictly positive")
    nx, ny = g.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    cx, cy = harmonic_face_coefficients(coeff, g)
    wx = (cx / g.hx**2).ravel()
    wy = (cy / g.hy**2).ravel()
    lo_x, hi_x = idx[:-1, :].ravel(), idx[1:, :].ravel()
    lo_y, hi_y = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    rows = np.concatenate([lo_x, hi_x, lo_y, hi_y])
    cols = np.concatenate([hi_x, lo_x, hi_y, lo_y])
    vals = np.concatenate([wx, wx, wy, wy])
    diag = np.zeros(nx * ny)
    np.add.at(diag, lo_x, -wx)
    np.add.at(diag, hi_x, -wx)
    np.add.at(diag, lo_y, -wy)
    np.add.at(diag, hi_y, -wy)
    if bc == "dirichlet":
        # wall at half a cell: flux coeff * (0 - s) / (h/2)
        d = np.zeros((nx, ny))
        d[0, :] -= 2.0 * coeff[0, :] / g.hx**2
        d[-1, :] -= 2.0 * coeff[-1, :] / g.hx**2
        d[:, 0] -= 2.0 * coeff[:, 0] / g.hy**2
        d[:, -1] -= 2.0 * coeff[:, -1] / g.hy**2
        diag += d.ravel()
    m = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    return (m + sp.diags(diag)).tocsr()


def div_coeff_grad(coeff: np.ndarray, s: np.ndarray, bc: str, g: Grid) -> np.ndarray:
    """div(coeff grad s) with harmonic-mean face coefficients."""
    _check_scalar(s, g)
    return (diffusion_matrix(coeff, g, bc) @ s.ravel()).reshape(g.shape)


def pairing(s: np.ndarray, t: np.ndarray, g: Grid) -> float:
    """Cell inner product sum(s * t) * hx * hy."""
    return float(np.sum(s * t)) * g.cell_area


def face_pairing(a: VectorField, b: VectorField, g: Grid) -> float:
    """Face inner product with weight hx * hy on every face."""
    return (float(np.sum(a.u * b.u)) + float(np.sum(a.v * b.v))) * g.cell_area
