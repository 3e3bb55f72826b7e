import numpy as np
import pytest

from nsfsim.grid import Grid, VectorField, divergence
from nsfsim.scenarios import velocity_from_streamfunction
from nsfsim.transport import (
    CFLError,
    advect_scalar,
    advect_velocity,
    mass_flux,
    outflow_cfl,
    transport_density,
)


def rotation(g):
    """Discretely divergence-free swirl, tangential at the walls."""
    X, Y = g.node_mesh()
    psi = np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2 / np.pi
    return velocity_from_streamfunction(psi, g)


def uniform(g, a, b):
    w = VectorField(np.full(g.u_shape, float(a)), np.full(g.v_shape, float(b)))
    return w.zero_walls()


class TestTransportDensity:
    g = Grid(24, 24)

    def test_no_advection(self):
        rho = 1 + 0.1 * np.random.default_rng(0).random(self.g.shape)
        np.testing.assert_array_equal(transport_density(rho, VectorField.zeros(self.g), 0.1, self.g), rho)

    def test_uniform_density_is_steady(self):
        adv = rotation(self.g)
        out = transport_density(np.full(self.g.shape, 1.3), adv, 0.01, self.g)
        np.testing.assert_allclose(out, 1.3, rtol=1e-14)

    def test_rotation_conserves_mass_and_bounds(self):
        g = self.g
        adv = rotation(g)
        assert np.abs(divergence(adv, g)).max() < 1e-13
        X, Y = g.cell_mesh()
        rho = 1 + 0.3 * np.exp(-40 * ((X - 0.3) ** 2 + (Y - 0.5) ** 2))
        dt = 0.5 / (outflow_cfl(adv, 1.0, g))
        m0 = rho.sum()
        dev = [np.abs(rho - 1).max()]
        for _ in range(100):
            rho = transport_density(rho, adv, dt, g)
            dev.append(np.abs(rho - 1).max())
        assert abs(rho.sum() - m0) / m0 <= 1e-13
        assert np.all(np.diff(dev) <= 1e-15)
        assert rho.min() >= 1 - 1e-15

    def test_cfl_violation(self):
        adv = rotation(self.g)
        with pytest.raises(CFLError):
            transport_density(np.ones(self.g.shape), adv, 2.0 / outflow_cfl(adv, 1.0, self.g), self.g)

    def test_flux_is_upwind(self):
        g = Grid(4, 4)
        rho = np.arange(16.0).reshape(4, 4) + 1
        F = mass_flux(rho, uniform(g, 1.0, -1.0), g)
        np.testing.assert_array_equal(F.u[1:-1], rho[:-1])
        np.testing.assert_array_equal(F.v[:, 1:-1], -rho[:, 1:])
        assert F.wall_normal_max() == 0.0


class TestAdvectScalar:
    g = Grid(16, 12)

    def test_zero_advection(self):
        s = np.random.default_rng(1).random(self.g.shape)
        assert np.abs(advect_scalar(s, np.ones(self.g.shape), VectorField.zeros(self.g), self.g)).max() == 0.0

    def test_constant_scalar(self):
        out = advect_scalar(
            np.full(self.g.shape, 4.0), 1 + 0.1 * np.random.default_rng(2).random(self.g.shape), rotation(self.g), self.g
        )
        assert np.abs(out).max() < 1e-12

    def test_linear_scalar(self):
        g = self.g
        X, _ = g.cell_mesh()
        out = advect_scalar(X, np.ones(g.shape), uniform(g, 1.0, 0.0), g)
        # upwind difference of a linear field is exact away from the inflow wall
        np.testing.assert_allclose(out[1:, :], 1.0, rtol=1e-12)
        assert abs(out[0, 0] - 1.0) > 0.1


class TestAdvectVelocity:
    g = Grid(16, 16)

    def test_zero_advection(self):
        w = rotation(self.g)
        assert advect_velocity(w, np.ones(self.g.shape), VectorField.zeros(self.g), self.g).max_abs() == 0.0

    def test_uniform_field(self):
        g = self.g
        out = advect_velocity(uniform(g, 2.0, -1.0), np.ones(g.shape), rotation(g), g)
        # the no-slip wall values only enter the first interior faces
        assert np.abs(out.u[2:-2, 1:-1]).max() < 1e-12
        assert np.abs(out.v[1:-1, 2:-2]).max() < 1e-12

    def test_manufactured_first_order(self):
        # w = (y sin(pi x), x sin(pi y)), adv = (1, 1/2)
        errs = []
        for n in (16, 32, 64, 128):
            g = Grid(n, n)
            Xu, Yu = g.u_mesh()
            Xv, Yv = g.v_mesh()
            w = VectorField(Yu * np.sin(np.pi * Xu), Xv * np.sin(np.pi * Yv)).zero_walls()
            out = advect_velocity(w, np.ones(g.shape), uniform(g, 1.0, 0.5), g)
            exu = np.pi * Yu * np.cos(np.pi * Xu) + 0.5 * np.sin(np.pi * Xu)
            exv = np.sin(np.pi * Yv) + 0.5 * np.pi * Xv * np.cos(np.pi * Yv)
            # a uniform advecting field jumps to zero at the walls; skip the first face row
            eu = np.abs(out.u[2:-2, 1:-1] - exu[2:-2, 1:-1]).max()
            ev = np.abs(out.v[1:-1, 2:-2] - exv[1:-1, 2:-2]).max()
            errs.append(max(eu, ev))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 0.9), rates
