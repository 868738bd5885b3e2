import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from afcflow import fem
from afcflow.fem import ConvergenceError
from afcflow.mesh import build_uniform_mesh
from afcflow.problems import FluxField, builtin_flux


def const_flux(bx, by, ell=0):
    return FluxField(f"const-{bx}-{by}-{ell}", ell,
                     lambda x, y, t: (np.full(np.shape(x), bx), np.full(np.shape(x), by)), True)


def test_mass_matches_symbolic(symbolic_m2):
    mass_exact, _ = symbolic_m2
    mass = fem.assemble_mass(build_uniform_mesh(2)).toarray()
    np.testing.assert_allclose(mass, mass_exact, rtol=0, atol=1e-14)
    assert mass[4, 4] == pytest.approx(0.125, abs=1e-15)


def test_convection_matches_symbolic(symbolic_m2):
    _, conv_exact = symbolic_m2
    T = fem.assemble_convection(build_uniform_mesh(2), const_flux(1.0, 0.0)).toarray()
    np.testing.assert_allclose(T, conv_exact, rtol=0, atol=1e-14)


def test_convection_symbolic_diagonal_direction():
    mass, conv = oracles.symbolic_matrices((1, 3))
    exact = np.array(conv.tolist(), dtype=float)
    T = fem.assemble_convection(build_uniform_mesh(2), builtin_flux("advect-13")).toarray()
    np.testing.assert_allclose(T, exact, rtol=0, atol=1e-14)


def test_lumped_mass_values(symbolic_m2):
    mass_exact, _ = symbolic_m2
    m = fem.lump_mass(fem.assemble_mass(build_uniform_mesh(2)))
    np.testing.assert_allclose(m, mass_exact.sum(axis=1), rtol=0, atol=1e-14)
    assert m[4] == pytest.approx(0.25, abs=1e-15)
    # corner (0,0) touches two triangles, corner (1,0) only one
    assert m[0] == pytest.approx(2 * (1 / 8) / 3, abs=1e-15)
    assert m[2] == pytest.approx((1 / 8) / 3, abs=1e-15)
    assert m.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("M", [3, 8, 20])
def test_mass_properties(M):
    mass = fem.assemble_mass(build_uniform_mesh(M))
    dense = mass.toarray()
    np.testing.assert_array_equal(dense, dense.T)
    assert dense.min() >= 0
    assert dense.sum() == pytest.approx(1.0, rel=1e-13)
    m = fem.lump_mass(mass)
    np.testing.assert_allclose(m, dense.sum(axis=1), rtol=1e-14)
    assert np.all(m > 0)


def test_lump_mass_rejects_corrupt_matrix():
    with pytest.raises(RuntimeError):
        fem.lump_mass(sp.csr_matrix(np.array([[1.0, -2.0], [-2.0, 1.0]])))


def test_lumped_inner_product(rng):
    mesh = build_uniform_mesh(3)
    m = fem.lump_mass(fem.assemble_mass(mesh))
    zero = np.zeros(mesh.n_nodes)
    assert fem.lumped_inner_product(mesh, m, zero, zero) == 0.0
    e = np.zeros(mesh.n_nodes)
    e[5] = 1.0
    assert fem.lumped_inner_product(mesh, m, e, e) == pytest.approx(m[5], rel=1e-15)
    for _ in range(5):
        psi, chi = rng.standard_normal((2, mesh.n_nodes))
        ref = oracles.element_loop_lumped_product(mesh.nodes, mesh.triangles, psi, chi)
        assert fem.lumped_inner_product(mesh, m, psi, chi) == pytest.approx(ref, rel=1e-13, abs=1e-15)


def test_zero_velocity_gives_zero_matrix():
    T = fem.assemble_convection(build_uniform_mesh(4), const_flux(0.0, 0.0))
    assert abs(T).max() == 0.0


@pytest.mark.parametrize("c", [0.0, 0.7, -2.5])
def test_quadratic_flux_with_constant_state(c):
    mesh = build_uniform_mesh(5)
    base = fem.assemble_convection(mesh, const_flux(0.5, 0.5, 0))
    quad = fem.assemble_convection(mesh, const_flux(0.5, 0.5, 1), np.full(mesh.n_nodes, c))
    np.testing.assert_allclose(quad.toarray(), c * base.toarray(), atol=1e-15)


def test_convection_interior_row_sums_vanish():
    # sum_j tau_ij = (beta, grad phi_i) = 0 for interior i and constant beta
    mesh = build_uniform_mesh(6)
    T = fem.assemble_convection(mesh, builtin_flux("advect-13"))
    rows = np.asarray(T.sum(axis=1)).ravel()
    assert np.abs(rows[mesh.interior_ids]).max() < 1e-14


def test_convection_affine_velocity_exact():
    # midpoint rule is exact for affine beta: compare with sympy on M=2
    _, conv = oracles.symbolic_matrices((oracles.X, -oracles.Y))
    exact = np.array(conv.tolist(), dtype=float)
    flux = FluxField("xy", 0, lambda x, y, t: (x, -y), True)
    T = fem.assemble_convection(build_uniform_mesh(2), flux).toarray()
    np.testing.assert_allclose(T, exact, atol=1e-14)


def test_convection_argument_errors():
    mesh = build_uniform_mesh(3)
    with pytest.raises(ValueError):
        fem.assemble_convection(mesh, builtin_flux("burgers"))
    bad = type("F", (), {"exponent": 2, "beta": None})()
    with pytest.raises(ValueError):
        fem.assemble_convection(mesh, bad)


def test_cg_identity_and_zero(rng):
    mesh = build_uniform_mesh(4)
    b = rng.standard_normal(mesh.n_nodes)
    b[mesh.boundary] = 0
    A = sp.identity(mesh.n_nodes, format="csr")
    np.testing.assert_allclose(fem.cg_solve(A, b, fixed=mesh.boundary_ids), b, atol=1e-14)
    assert not fem.cg_solve(A, np.zeros(mesh.n_nodes)).any()


def test_cg_recovers_solution(rng):
    mesh = build_uniform_mesh(12)
    mass = fem.assemble_mass(mesh)
    x_star = rng.standard_normal(mesh.n_nodes)
    x_star[mesh.boundary] = 0
    b = mass @ x_star
    b[mesh.boundary] = 0
    x = fem.cg_solve(mass, b, tol=1e-13, fixed=mesh.boundary_ids)
    assert np.all(x[mesh.boundary] == 0)
    resid = mass @ x - b
    resid[mesh.boundary] = 0
    assert np.linalg.norm(resid) <= 1e-13 * np.linalg.norm(b)
    np.testing.assert_allclose(x, x_star, atol=1e-10)


def test_cg_reports_failure(rng):
    mesh = build_uniform_mesh(12)
    mass = fem.assemble_mass(mesh)
    b = mass @ rng.standard_normal(mesh.n_nodes)
    with pytest.raises(ConvergenceError) as info:
        fem.cg_solve(mass, b, tol=1e-15, max_iter=2, precondition=False)
    assert info.value.residual > 0


def test_interpolate_examples():
    mesh = build_uniform_mesh(2)
    np.testing.assert_array_equal(fem.interpolate(mesh, lambda x, y: 1.0), np.ones(9))
    poly = fem.interpolate(mesh, lambda x, y: x * (1 - x) * y * (1 - y))
    assert poly[4] == pytest.approx(0.0625, abs=1e-16)


def test_interpolate_boundary_and_errors():
    mesh = build_uniform_mesh(10)
    gauss = lambda x, y: np.exp(-100 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))
    u = fem.interpolate(mesh, gauss, enforce_bc=True)
    assert np.all(u[mesh.boundary] == 0)
    x, y = mesh.nodes[mesh.interior_ids].T
    np.testing.assert_array_equal(u[mesh.interior_ids], gauss(x, y))
    with pytest.raises(ValueError), np.errstate(divide="ignore"):
        fem.interpolate(mesh, lambda x, y: 1.0 / (x - 0.5))


def test_l2_error_examples():
    mesh = build_uniform_mesh(8)
    affine = lambda x, y, t=0.0: 1 + 2 * x - 3 * y
    u = fem.interpolate(mesh, affine)
    assert fem.l2_error(mesh, u, affine) < 1e-14
    sine = lambda x, y, t: np.sin(np.pi * x) * np.sin(np.pi * y)
    err = fem.l2_error(build_uniform_mesh(16), np.zeros(17 * 17), sine)
    assert err == pytest.approx(0.5, rel=1e-4)


def test_discrete_norm_matches_quadrature(rng):
    mesh = build_uniform_mesh(6)
    mass = fem.assemble_mass(mesh)
    e = rng.standard_normal(mesh.n_nodes)
    zero = lambda x, y, t: np.zeros_like(x)
    # the degree-4 rule integrates squares of P1 functions exactly
    assert fem.discrete_l2_norm(mass, e) == pytest.approx(fem.l2_error(mesh, e, zero), rel=1e-13)


def test_quadrature_rules_exact_degree():
    mesh = build_uniform_mesh(3)
    space = fem.p1_space(mesh)
    # int x^a y^b over the unit square
    for rule in (fem.VERTEX_RULE, fem.MIDPOINT_RULE, fem.DUNAVANT6_RULE):
        pts = space.quadrature_points(rule)
        for a in range(rule.degree + 1):
            b = rule.degree - a
            vals = pts[..., 0] ** a * pts[..., 1] ** b
            approx = np.sum(space.area[:, None] * rule.weights * vals)
            assert approx == pytest.approx(1 / ((a + 1) * (b + 1)), rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_norm_equivalence_band(seed):
    mesh = build_uniform_mesh(8)
    mass = fem.assemble_mass(mesh)
    m = fem.lump_mass(mass)
    chi = np.random.default_rng(seed).standard_normal(mesh.n_nodes)
    ratio = fem.discrete_l2_norm(mass, chi) / math.sqrt(fem.lumped_inner_product(mesh, m, chi, chi))
    assert 0.5 - 1e-12 <= ratio <= 1 + 1e-12


def lumping_errors(ms=(8, 16, 32)):
    chi = lambda x, y: np.sin(np.pi * x) * np.exp(y)
    psi = lambda x, y: np.cos(2 * x) * (1 + y * y)
    errs = []
    for M in ms:
        mesh = build_uniform_mesh(M)
        mass = fem.assemble_mass(mesh)
        a, b = fem.interpolate(mesh, chi), fem.interpolate(mesh, psi)
        errs.append(abs(a @ (mass @ b) - fem.lumped_inner_product(mesh, fem.lump_mass(mass), a, b)))
    return errs


def test_mass_lumping_rate():
    e = lumping_errors()
    assert min(math.log2(e[0] / e[1]), math.log2(e[1] / e[2])) >= 1.8
