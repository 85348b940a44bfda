import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bemlocal.geometry import canonical_geometry, initial_mesh, refine_uniform
from bemlocal.norms import energy_error_global, neg_half_norm_local, tangential_error
from bemlocal.operators import CoefficientVector, assemble_V, hat_integrals
from bemlocal.solutions import SingularSolution, solution_for
from bemlocal.solver import SolverError, galerkin_solve_hypsing, galerkin_solve_symm, solve_spd


def test_identity_solve():
    b = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(solve_spd(np.eye(3), b), b)


def test_zero_rhs_gives_zero():
    m = initial_mesh(canonical_geometry("square"), elements_per_edge=2)
    V = assemble_V(m)
    x = solve_spd(V, CoefficientVector(np.zeros(8), "P0", m))
    assert isinstance(x, CoefficientVector)
    assert not np.any(x.values)


def test_indefinite_matrix_names_pivot():
    A = np.diag([2.0, 1.0, -1.0, 3.0])
    with pytest.raises(SolverError, match="pivot 2"):
        solve_spd(A, np.ones(4))


def test_shape_mismatch():
    with pytest.raises(SolverError):
        solve_spd(np.eye(3), np.ones(2))


@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
@settings(max_examples=20)
def test_random_spd_residual(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    A = B @ B.T + n * np.eye(n)
    b = rng.normal(size=n)
    x = solve_spd(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_symm_orthogonality_on_lshape():
    p = canonical_geometry("lshape")
    m = initial_mesh(p, target_h=p.perimeter / 64)
    s = galerkin_solve_symm(m, solution_for(p, 2 / 3))
    assert m.n_elements == 64
    assert s.orthogonality_residual() < 1e-12


def test_symm_reproduces_linear_flux(canonical):
    m = refine_uniform(initial_mesh(canonical, elements_per_edge=3))
    phi = galerkin_solve_symm(m, SingularSolution(1.0)).values
    assert np.allclose(phi, m.normals[:, 0], atol=1e-8)


def test_hypsing_reproduces_linear_trace(canonical):
    m = refine_uniform(initial_mesh(canonical, elements_per_edge=3))
    sol = galerkin_solve_hypsing(m, SingularSolution(1.0))
    a = hat_integrals(m)
    x = m.nodes[:, 0]
    assert np.allclose(sol.values, x - (a @ x) / a.sum(), atol=1e-10)


def test_hypsing_solution_has_zero_mean():
    p = canonical_geometry("zshape")
    m = initial_mesh(p, elements_per_edge=4)
    sol = galerkin_solve_hypsing(m, solution_for(p, 1 / 3))
    # summing the rows of (W + a a^T) u = f gives <u, 1> |Gamma| = sum(f), which vanishes up to quadrature
    assert sol.mean() == pytest.approx(np.sum(sol.rhs.values) / p.perimeter, abs=1e-14)
    assert abs(sol.mean()) < 1e-9


def test_energy_error_decreases_under_refinement():
    # nested spaces make the Galerkin energy error monotone
    p = canonical_geometry("lshape")
    sol = solution_for(p, 1 / 3)
    m = initial_mesh(p, target_h=p.perimeter / 128)
    errs = []
    for _ in range(2):
        phi = galerkin_solve_symm(m, sol).values
        errs.append(energy_error_global(m, phi, sol))
        m = refine_uniform(m)
    assert errs[1] < errs[0]



def test_solve_V_random_rhs_residual():
    p = canonical_geometry("lshape")
    m = initial_mesh(p, target_h=p.perimeter / 64)
    V = assemble_V(m).values
    b = np.random.default_rng(11).normal(size=m.n_elements)
    x = solve_spd(V, b)
    assert np.linalg.norm(V @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_constant_trace_gives_zero_flux():
    m = initial_mesh(canonical_geometry("zshape"), elements_per_edge=3)
    phi = galerkin_solve_symm(m, lambda x: np.full(len(x), 2.5)).values
    assert np.max(np.abs(phi)) < 1e-8


def test_zero_flux_gives_zero_trace():
    m = initial_mesh(canonical_geometry("lshape"), elements_per_edge=3)
    u = galerkin_solve_hypsing(m, lambda x, n: np.zeros(len(x))).values
    assert not np.any(u)


def test_hypsing_energy_error_decreases():
    # <W e, e> = <V e', e'> with e' the tangential derivative of the error
    p = canonical_geometry("lshape")
    sol = solution_for(p, 2 / 3)
    m = initial_mesh(p, elements_per_edge=2)
    errs = []
    for _ in range(4):
        m = refine_uniform(m)
        u = galerkin_solve_hypsing(m, sol).values
        errs.append(neg_half_norm_local(tangential_error(m, u, sol), None, 2, "accurate"))
    assert all(b < a for a, b in zip(errs[:-1], errs[1:]))
