import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.linalg import spsolve

from roundoff.errors import CgDiverged, OutsideDomain
from roundoff.fem import (
    RULES,
    _basis,
    assemble_poisson,
    evaluate,
    interpolate,
    pcg,
    solve_dirichlet,
    source_preset,
    weighted_eigen_min,
)
from roundoff.geometry import construct_rounded_domain, preset, select_default_params
from roundoff.mesh import SizingField, mesh_domain
from roundoff.weights import ConstantWeight, WeightFunction


@pytest.fixture(scope="module")
def unit_square_p2():
    return mesh_domain(preset("square"), SizingField(1 / 16), order=2)


@pytest.fixture(scope="module")
def rounded_p2():
    P = preset("star5")
    d = construct_rounded_domain(P, select_default_params(P).at(2))
    w = WeightFunction.for_domain(d)
    return d, w, mesh_domain(d, SizingField(0.1, 0.0, 0.5, w), order=2)


@pytest.mark.parametrize("degree", sorted(RULES))
def test_quadrature_rules_exact_on_monomials(degree):
    rule = RULES[degree]
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            got = rule.weights @ (rule.points[:, 0] ** i * rule.points[:, 1] ** j)
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert got == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("order,nodes", [(1, [(0, 0), (1, 0), (0, 1)]), (2, [(0, 0), (1, 0), (0, 1), (0.5, 0), (0.5, 0.5), (0, 0.5)])])
def test_basis_is_nodal(order, nodes):
    val, grad, _ = _basis(order, np.array(nodes, dtype=float))
    assert np.allclose(val, np.eye(len(nodes)), atol=1e-15)
    pts = np.random.default_rng(1).uniform(0, 0.5, (7, 2))
    v, g, h = _basis(order, pts)
    assert np.allclose(v.sum(axis=1), 1.0)
    assert np.allclose(g.sum(axis=1), 0.0)
    assert np.allclose(h.sum(axis=1), 0.0)


def test_stiffness_and_mass_identities(rounded_p2):
    d, w, m = rounded_p2
    s = assemble_poisson(m, 2, w)
    K, M = s.stiffness, s.mass
    assert abs(K - K.T).max() < 1e-12
    assert np.abs(K @ np.ones(s.n_dofs)).max() < 1e-10
    assert np.ones(s.n_dofs) @ (M @ np.ones(s.n_dofs)) == pytest.approx(d.area(), rel=1e-5)
    c = ConstantWeight(0.25)
    assert abs(s.weighted_mass(c) - 16 * M).max() < 1e-10


def test_pcg_matches_direct_solver():
    rng = np.random.default_rng(3)
    n = 60
    A = sp.random(n, n, density=0.1, random_state=4)
    A = (A @ A.T + sp.identity(n) * 2).tocsr()
    b = rng.normal(size=n)
    x, it = pcg(A, b, tol=1e-12)
    assert np.allclose(x, spsolve(A.tocsc(), b), atol=1e-9)
    assert it > 0
    assert pcg(A, np.zeros(n))[0].tolist() == [0.0] * n
    with pytest.raises(CgDiverged):
        pcg(A, b, tol=1e-14, maxiter=2)


def test_zero_source_gives_zero_solution(rounded_p2):
    _, w, m = rounded_p2
    sol = solve_dirichlet(m, 2, source_preset("zero"))
    assert np.all(sol.values == 0.0)


def test_manufactured_solution_on_square(unit_square_p2):
    exact = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])  # noqa: E731
    sol = solve_dirichlet(unit_square_p2, 2, source_preset("sine"))
    x = unit_square_p2.nodes
    assert np.abs(sol.values - exact(x)).max() < 2e-4
    assert np.all(sol.values[unit_square_p2.boundary_nodes] == 0.0)


def test_dirichlet_eigenvalue_of_unit_square(unit_square_p2):
    lam = weighted_eigen_min(unit_square_p2, 2, ConstantWeight(1.0))
    assert lam == pytest.approx(2 * math.pi**2, rel=1e-3)


def test_eigenvalue_scales_with_constant_weight(unit_square_p2):
    a = weighted_eigen_min(unit_square_p2, 1, ConstantWeight(1.0))
    b = weighted_eigen_min(unit_square_p2, 1, ConstantWeight(0.5))
    assert b == pytest.approx(a / 4, rel=1e-6)


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_p2_reproduces_quadratics(c):
    m = _SQ
    q = lambda x: c[0] + c[1] * x[:, 0] + c[2] * x[:, 1] + c[3] * x[:, 0] ** 2 + c[4] * x[:, 0] * x[:, 1] + c[5] * x[:, 1] ** 2  # noqa: E731
    u = interpolate(m, q, 2)
    pts = np.random.default_rng(5).uniform(0.01, 0.99, (20, 2))
    assert np.allclose(evaluate(u, pts), q(pts), atol=1e-12)
    g = evaluate(u, pts[0], derivative=1)
    x, y = pts[0]
    assert np.allclose(g, [c[1] + 2 * c[3] * x + c[4] * y, c[2] + c[4] * x + 2 * c[5] * y], atol=1e-10)
    H = evaluate(u, pts[0], derivative=2)
    assert np.allclose(H, [[2 * c[3], c[4]], [c[4], 2 * c[5]]], atol=1e-8)


_SQ = mesh_domain(preset("square"), SizingField(0.25), order=2)


def test_evaluate_on_curved_mesh_matches_nodes(rounded_p2):
    d, w, m = rounded_p2
    f = lambda x: np.cos(x[:, 0]) + x[:, 1] ** 2  # noqa: E731
    u = interpolate(m, f, 2)
    sample = m.nodes[:: max(1, len(m.nodes) // 200)]
    assert np.allclose(evaluate(u, sample), f(sample), atol=1e-10)


def test_evaluate_outside_raises(unit_square_p2):
    u = interpolate(unit_square_p2, lambda x: x[:, 0], 2)
    with pytest.raises(OutsideDomain):
        evaluate(u, np.array([[2.0, 2.0]]))


def test_solution_export(tmp_path, unit_square_p2):
    sol = solve_dirichlet(unit_square_p2, 1, source_preset("one"))
    sol.export(tmp_path / "u.txt")
    rows = (tmp_path / "u.txt").read_text().splitlines()
    assert len(rows) == unit_square_p2.n_vertex_nodes
    assert min(float(r.split()[2]) for r in rows) < 0
