import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsfsim.grid import (
    Grid,
    VectorField,
    div_coeff_grad,
    diffusion_matrix,
    divergence,
    face_pairing,
    gradient,
    pairing,
    sym_gradient,
)


def sample(g, fu, fv):
    Xu, Yu = g.u_mesh()
    Xv, Yv = g.v_mesh()
    return VectorField(np.broadcast_to(fu(Xu, Yu), g.u_shape).astype(float), np.broadcast_to(fv(Xv, Yv), g.v_shape).astype(float))


class TestGrid:
    def test_spacings(self):
        g = Grid(8, 4, 2.0, 1.0)
        assert g.hx == 0.25 and g.hy == 0.25
        assert g.u_shape == (9, 4) and g.v_shape == (8, 5) and g.node_shape == (9, 5)
        assert g.n_vel == 7 * 4 + 8 * 3

    @pytest.mark.parametrize("kw", [dict(nx=3, ny=8), dict(nx=8, ny=2), dict(nx=8, ny=8, lx=0.0), dict(nx=8, ny=8, ly=-1.0)])
    def test_rejects_bad_geometry(self, kw):
        with pytest.raises(ValueError):
            Grid(**kw)

    def test_node_weights_sum_to_area(self):
        g = Grid(6, 9, 1.5, 2.0)
        assert np.sum(g.node_weights()) * g.cell_area == pytest.approx(g.area)


class TestDivergence:
    g = Grid(8, 6, 1.0, 1.5)

    def test_uniform_field(self):
        w = sample(self.g, lambda x, y: 1.0 + 0 * x, lambda x, y: 1.0 + 0 * x)
        assert np.abs(divergence(w, self.g)).max() == 0.0

    def test_linear_divergence_free(self):
        w = sample(self.g, lambda x, y: x, lambda x, y: -y)
        assert np.abs(divergence(w, self.g)).max() < 1e-13

    def test_linear_expansion(self):
        w = sample(self.g, lambda x, y: x, lambda x, y: y)
        np.testing.assert_allclose(divergence(w, self.g), 2.0, atol=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            divergence(VectorField.zeros(Grid(5, 5)), self.g)


class TestGradient:
    def test_constant(self):
        g = Grid(7, 5)
        w = gradient(np.full(g.shape, 3.0), g)
        assert w.max_abs() == 0.0

    def test_linear(self):
        g = Grid(7, 5)
        X, _ = g.cell_mesh()
        w = gradient(X, g)
        np.testing.assert_allclose(w.u[1:-1], 1.0, atol=1e-13)
        assert w.wall_normal_max() == 0.0
        assert np.abs(w.v).max() == 0.0

    def test_quadratic_second_order(self):
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n)
            X, _ = g.cell_mesh()
            w = gradient(X**2, g)
            Xu, _ = g.u_mesh()
            errs.append(np.abs(w.u[1:-1] - 2 * Xu[1:-1]).max())
        # centred differences of x^2 are exact at faces
        assert max(errs) < 1e-12

    def test_smooth_second_order(self):
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n)
            X, Y = g.cell_mesh()
            w = gradient(np.sin(3 * X) * np.cos(2 * Y), g)
            Xu, Yu = g.u_mesh()
            errs.append(np.abs(w.u[1:-1] - 3 * np.cos(3 * Xu[1:-1]) * np.cos(2 * Yu[1:-1])).max())
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 1.9)


def test_summation_by_parts():
    g = Grid(9, 7, 1.3, 0.8)
    rng = np.random.default_rng(3)
    s = rng.standard_normal(g.shape)
    w = VectorField(rng.standard_normal(g.u_shape), rng.standard_normal(g.v_shape)).zero_walls()
    lhs = pairing(s, divergence(w, g), g)
    rhs = -face_pairing(gradient(s, g), w, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestSymGradient:
    g = Grid(8, 8)

    def test_rigid_rotation(self):
        w = sample(self.g, lambda x, y: -y, lambda x, y: x)
        D = sym_gradient(w, self.g)
        assert np.abs(D.xx).max() < 1e-13 and np.abs(D.yy).max() < 1e-13
        # interior nodes; wall nodes see the no-slip ghost, not the sampled field
        assert np.abs(D.xy[1:-1, 1:-1]).max() < 1e-13

    def test_shear(self):
        w = sample(self.g, lambda x, y: y, lambda x, y: 0 * x)
        D = sym_gradient(w, self.g)
        assert np.abs(D.xx).max() == 0.0 and np.abs(D.yy).max() == 0.0
        np.testing.assert_allclose(D.xy[1:-1, 1:-1], 0.5, atol=1e-13)
        assert D.yx is D.xy

    def test_stretch(self):
        w = sample(self.g, lambda x, y: x, lambda x, y: 0 * x)
        D = sym_gradient(w, self.g)
        np.testing.assert_allclose(D.xx, 1.0, atol=1e-13)
        assert np.abs(D.yy).max() == 0.0
        assert np.abs(D.xy[1:-1, 1:-1]).max() == 0.0

    def test_centre_sampling(self):
        w = sample(self.g, lambda x, y: y, lambda x, y: 0 * x)
        xx, xy, yx, yy = sym_gradient(w, self.g).at_centers()
        np.testing.assert_allclose(xy[1:-1, 1:-1], 0.5, atol=1e-13)
        assert xy is yx or np.array_equal(xy, yx)


class TestDiffusion:
    def test_quadratic_constant_coefficient(self):
        g = Grid(10, 10)
        X, Y = g.cell_mesh()
        out = div_coeff_grad(np.full(g.shape, 2.5), X**2 + Y**2, "neumann", g)
        np.testing.assert_allclose(out[1:-1, 1:-1], 4 * 2.5, rtol=1e-11)

    def test_constant_field(self):
        g = Grid(6, 9)
        rng = np.random.default_rng(0)
        c = 0.5 + rng.random(g.shape)
        assert np.abs(div_coeff_grad(c, np.full(g.shape, 7.0), "neumann", g)).max() < 1e-10

    def test_manufactured_second_order(self):
        # div((1 + x) grad cos(pi x) cos(pi y)) evaluated by hand
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n)
            X, Y = g.cell_mesh()
            s = np.cos(np.pi * X) * np.cos(np.pi * Y)
            exact = -np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y) - 2 * np.pi**2 * (1 + X) * s
            out = div_coeff_grad(1 + X, s, "neumann", g)
            errs.append(np.sqrt(np.mean((out - exact) ** 2)))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 1.8), rates

    def test_rejects_nonpositive(self):
        g = Grid(5, 5)
        c = np.ones(g.shape)
        c[2, 2] = 0.0
        with pytest.raises(ValueError):
            div_coeff_grad(c, np.ones(g.shape), "neumann", g)
        with pytest.raises(ValueError):
            diffusion_matrix(np.ones(g.shape), g, "robin")

    @pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
    def test_m_matrix(self, bc):
        g = Grid(6, 5)
        rng = np.random.default_rng(1)
        K = diffusion_matrix(0.1 + rng.random(g.shape), g, bc).toarray()
        M = -K
        off = M - np.diag(np.diag(M))
        assert np.all(off <= 0)
        assert np.all(np.diag(M) > 0)
        if bc == "dirichlet":
            assert np.all(np.linalg.inv(M) >= -1e-12)
        else:
            np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-9)
            np.testing.assert_allclose(K, K.T, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    c=arrays(np.float64, (6, 5), elements=st.floats(0.05, 20.0)),
    s=arrays(np.float64, (6, 5), elements=st.floats(-5.0, 5.0)),
)
def test_neumann_diffusion_conserves(c, s):
    g = Grid(6, 5)
    out = div_coeff_grad(c, s, "neumann", g)
    scale = max(1.0, float(np.abs(out).max()))
    assert abs(out.sum()) <= 1e-10 * scale * out.size
