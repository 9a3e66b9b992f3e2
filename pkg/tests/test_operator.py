import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from reducedfv.mesh import build_grid, build_tensor_grid, catalytic_index, channel, tag_boundary
from reducedfv.operator import (
    VelocityField,
    assemble,
    bernoulli,
    face_flux,
    hagen_poiseuille,
    zero_velocity,
)

mpmath.mp.dps = 40


def bernoulli_mp(x):
    x = mpmath.mpf(x)
    return float(x / mpmath.expm1(x)) if x != 0 else 1.0


def test_bernoulli_zero():
    assert bernoulli(0.0) == 1.0


def test_bernoulli_one():
    assert bernoulli(1.0) == pytest.approx(0.5819767069, abs=1e-10)
    assert bernoulli(1.0) == pytest.approx(bernoulli_mp(1.0), rel=1e-15)


@pytest.mark.parametrize(
    "x", [-700.0, -50.0, -1.0, -1e-2, -9.99e-3, -1e-5, 1e-8, 9.99e-3, 1e-2, 0.3, 5.0, 50.0, 700.0]
)
def test_bernoulli_against_high_precision(x):
    assert bernoulli(x) == pytest.approx(bernoulli_mp(x), rel=1e-14)


def test_bernoulli_overflow_safe():
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        b = bernoulli(np.array([1e4, -1e4]))
    assert b[0] == 0.0
    assert b[1] == pytest.approx(1e4)


@settings(max_examples=300)
@given(st.floats(-20, 20))
def test_bernoulli_reflection(x):
    assert bernoulli(-x) - bernoulli(x) == pytest.approx(x, abs=1e-14)


def test_bernoulli_vectorized_shape():
    x = np.linspace(-3, 3, 12).reshape(3, 4)
    assert bernoulli(x).shape == (3, 4)


def test_hagen_poiseuille():
    v = hagen_poiseuille(1.0, 1.0)
    pts = np.array([[1.0, 0.0], [2.0, 0.5], [3.0, 1.0]])
    assert np.allclose(v(pts), [[0, 0], [0.25, 0], [0, 0]])
    assert np.all(v(np.column_stack([np.zeros(7), np.linspace(0, 1, 7)]))[:, 1] == 0)
    with pytest.raises(ValueError):
        hagen_poiseuille(-1.0)


def test_central_flux_at_zero_peclet():
    assert face_flux(2.0, 0.5, 0.1, 0.0, 3.0, 1.0) == pytest.approx(2.0 * 0.1 / 0.5 * 2.0)


@pytest.mark.parametrize("pe", [50.0, -50.0])
def test_upwind_limit(pe):
    s, h, D = 0.3, 0.1, 1e-3
    vn = pe * D / h
    yk, yl = 0.7, 0.2
    upwind = s * vn * (yk if vn > 0 else yl)
    assert face_flux(s, h, D, vn, yk, yl) == pytest.approx(upwind, rel=1e-12)


@pytest.mark.parametrize("c,D", [(1.0, 0.05), (-0.5, 0.2), (3.0, 0.01)])
def test_sg_flux_exact_for_1d_exponential(c, D):
    # Y = a + b exp(c x / D) solves c Y' - D Y'' = 0 with constant flux c*a
    grid = tag_boundary(build_tensor_grid(21, 3, 1.0, 0.2), (0.4, 0.6))
    op = assemble(grid, VelocityField("const", lambda x, y: (c + 0 * x, 0 * y)), D, [0.0])
    x = grid.node_coords[:, 0]
    a, b = 0.4, 0.3 * np.exp(-max(c, 0) / D)
    Y = a + b * np.exp(c * x / D)
    r = op.A_flux @ Y
    i = np.round(x * 20).astype(int)
    interior = (i > 0) & (i < 20)
    assert np.max(np.abs(r[interior])) <= 1e-12 * np.max(np.abs(Y))


def _trivial_operator(level=0, c=0.7):
    grid, cat = channel(level)
    return assemble(grid, zero_velocity(), 1.0, [c]), grid


def test_constant_solution_without_flow():
    op, _ = _trivial_operator()
    x = op.solve(op.b0[0])
    assert np.allclose(x, 0.7, atol=1e-12, rtol=0)


def test_zero_rhs_gives_zero():
    op, _ = _trivial_operator()
    assert np.all(op.solve(np.zeros(op.n)) == 0)


def test_round_trip_and_factorization_reuse():
    grid, cat = channel(1)
    op = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.2, 0.8, 0.0])
    rng = np.random.default_rng(0)
    for _ in range(3):
        w = rng.standard_normal(op.n)
        x = op.solve(op.A @ w)
        assert np.max(np.abs(x - w)) <= 1e-11 * np.max(np.abs(w))
    assert op.n_factorizations == 1
    assert op.n_solve_calls == 3
    with pytest.raises(ValueError):
        op.solve(np.zeros(op.n + 1))


def test_solve_residual_contract():
    grid, cat = channel(2)
    op = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.2, 0.8, 0.0])
    rhs = np.random.default_rng(1).standard_normal((op.n, 4))
    x = op.solve(rhs)
    assert np.max(np.abs(op.A @ x - rhs)) <= 1e-11 * np.max(np.abs(rhs))
    assert op.n_rhs_solved == 4


def test_singular_operator_reported():
    # no Dirichlet part: pure Neumann diffusion is singular
    grid = tag_boundary(build_grid(0), (2.0, 3.0), left="inert", right="inert")
    op = assemble(grid, zero_velocity(), 1.0, [0.0])
    with pytest.raises(Exception, match="singular"):
        op.solve(np.ones(op.n))


def test_affine_exactness_unit_flux():
    # unit outward flux density on the left edge, Y = 0 on the right: Y = x - 5
    grid = tag_boundary(build_grid(0), None, left="catalytic", right="inlet")
    cat = catalytic_index(grid)
    op = assemble(grid, zero_velocity(), 1.0, [0.0])
    Y = op.solve(op.flux_vector(cat.nodes, cat.sigma))
    x = grid.node_coords[:, 0]
    assert np.max(np.abs(Y - (x - 5.0))) <= 1e-12


def test_pure_diffusion_m_matrix():
    op, _ = _trivial_operator(1)
    A = op.A_flux.tocsr()
    off = A - sp.diags(A.diagonal())
    assert (off.data <= 0).all()
    assert abs(off - off.T).max() == 0


@pytest.mark.parametrize("v_in", [0.0, 1.0, 10.0])
def test_row_sums_vanish_off_dirichlet(v_in):
    grid, cat = channel(2)
    op = assemble(grid, hagen_poiseuille(v_in), 1e-2, [1.0])
    rs = op.A @ np.ones(op.n)
    rs[op.dirichlet_nodes] = 0
    scale = abs(op.A).max()
    assert np.max(np.abs(rs)) <= 1e-12 * scale


def test_operator_independent_of_reaction():
    grid, cat = channel(1)
    op1 = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.2, 0.8, 0.0])
    op2 = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.2, 0.8, 0.0])
    assert abs(op1.A - op2.A).max() == 0


@pytest.mark.parametrize("level", [0, 2])
def test_conservation_without_reaction(level):
    grid, cat = channel(level)
    op = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.3])
    b = op.b0[0].copy()
    Y = op.solve(b)
    inlet, outlet = op.boundary_fluxes(Y)
    assert abs(inlet + outlet) <= 1e-10 * max(abs(inlet), abs(outlet), 1e-300)
    # with a catalytic unit flux the balance includes the surface
    g = op.solve(op.flux_vector(cat.nodes, cat.sigma))
    inlet, outlet = op.boundary_fluxes(g)
    surface = cat.sigma.sum()
    assert abs(inlet + outlet + surface) <= 1e-10 * surface


@pytest.mark.parametrize("level", [0, 1, 2])
@pytest.mark.parametrize("v_in", [1.0, 20.0])
def test_maximum_principle_zero_reaction(level, v_in):
    grid, cat = channel(level)
    op = assemble(grid, hagen_poiseuille(v_in), 1e-2, [0.2, 0.8, 0.0])
    Y = op.solve(op.b0.T).T
    for s, yin in enumerate(op.Y_in):
        assert Y[s].min() >= yin - 1e-12
        assert Y[s].max() <= yin + 1e-12


def test_maximum_principle_with_source_free_flux_bc():
    grid, cat = channel(1)
    op = assemble(grid, hagen_poiseuille(1.0), 1e-2, [0.5])
    # unit uptake on the catalytic wall can only lower values below the inlet
    Y = op.solve(op.b0[0] + op.flux_vector(cat.nodes, cat.sigma))
    assert Y.max() <= 0.5 + 1e-12


def test_source_term_integrated_over_boxes():
    grid, cat = channel(0)
    op = assemble(grid, zero_velocity(), 1.0, [0.0, 0.0], f=lambda x, y: (1.0, 2.0))
    inner = np.setdiff1d(np.arange(op.n), op.dirichlet_nodes)
    assert np.allclose(op.b0[0, inner], grid.cell_measure[inner])
    assert np.allclose(op.b0[1, inner], 2 * grid.cell_measure[inner])
    x0 = op.x0()
    assert np.allclose(op.A @ x0[1], op.b0[1])


def test_assemble_rejects_bad_input():
    grid, cat = channel(0)
    with pytest.raises(ValueError):
        assemble(grid, zero_velocity(), 0.0, [0.0])
    with pytest.raises(ValueError):
        assemble(build_grid(0), zero_velocity(), 1.0, [0.0])
