import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bemlocal.geometry import Polygon, canonical_geometry, initial_mesh, refine_uniform
from bemlocal.operators import (
    OperatorError,
    assemble_rhs_hypsing,
    assemble_rhs_symm,
    assemble_stabilization,
    assemble_V,
    assemble_W,
    dump_matrix,
    hat_integrals,
    single_layer_matrix,
    slope_matrix,
)
from bemlocal.quadrature import INV_2PI, slp_pair_oracle
from bemlocal.solutions import SingularSolution, solution_for

from .conftest import rotation


def _square(n=4):
    return initial_mesh(canonical_geometry("square"), elements_per_edge=n)


def test_self_entry_closed_form():
    # int_0^L int_0^L log|s - t| = L^2 (log L - 3/2)
    a, b = np.array([[0.0, 0.0]]), np.array([[0.25, 0.0]])
    L = 0.25
    assert single_layer_matrix(a, b)[0, 0] == pytest.approx(-INV_2PI * L * L * (math.log(L) - 1.5), rel=1e-14)


@pytest.mark.parametrize("i,j", [(0, 0), (0, 1), (3, 4), (3, 5), (0, 8), (2, 13), (6, 7)])
def test_V_entries_match_oracle(i, j):
    m = _square()
    V = assemble_V(m).values
    ref = -INV_2PI * slp_pair_oracle(m.starts[i], m.ends[i], m.starts[j], m.ends[j], 1e-11)
    assert V[i, j] == pytest.approx(ref, abs=1e-10)


def test_V_reentrant_corner_entries_match_oracle():
    m = initial_mesh(canonical_geometry("lshape"), elements_per_edge=2)
    V = assemble_V(m).values
    c = m.corner_nodes()[m.polygon.singular_vertex]
    n = m.n_elements
    for i, j in [((c - 1) % n, c), ((c - 2) % n, (c + 1) % n)]:
        ref = -INV_2PI * slp_pair_oracle(m.starts[i], m.ends[i], m.starts[j], m.ends[j], 1e-11)
        assert V[i, j] == pytest.approx(ref, abs=1e-10)


def test_V_symmetric_positive_definite(canonical):
    m = refine_uniform(initial_mesh(canonical, elements_per_edge=3))
    V = assemble_V(m).values
    assert np.array_equal(V, V.T)
    assert np.min(np.linalg.eigvalsh(V)) > 0


def test_V_rejects_large_diameter():
    big = canonical_geometry("square").scaled(4.0)
    with pytest.raises(OperatorError, match="diameter"):
        assemble_V(initial_mesh(big, elements_per_edge=2))


@given(
    theta=st.floats(0, 2 * math.pi),
    shift=st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
    c=st.floats(0.3, 1.0),
)
@settings(max_examples=25)
def test_V_rigid_motion_and_scaling(theta, shift, c):
    m = _square(3)
    base = single_layer_matrix(m.starts, m.ends)
    R = rotation(theta)
    s = c * m.starts @ R.T + np.array(shift)
    e = c * m.ends @ R.T + np.array(shift)
    moved = single_layer_matrix(s, e)
    # log|c z| = log c + log|z| adds a rank-one term
    L = m.lengths
    expected = c * c * (base - INV_2PI * math.log(c) * np.outer(L, L))
    assert np.allclose(moved, expected, rtol=1e-11, atol=1e-13)


def test_symm_rhs_of_constant_vanishes(canonical):
    m = initial_mesh(canonical, elements_per_edge=3)
    b = assemble_rhs_symm(m, lambda x: np.ones(len(x))).values
    assert np.max(np.abs(b)) < 1e-10


def test_symm_rhs_of_linear_trace_is_V_times_normal_component(canonical):
    # u = x is harmonic with flux n_x, which lies in the P0 space
    m = initial_mesh(canonical, elements_per_edge=3)
    b = assemble_rhs_symm(m, lambda x: x[:, 0]).values
    V = assemble_V(m).values
    assert np.allclose(b, V @ m.normals[:, 0], atol=1e-9)


def test_symm_rhs_singular_trace_is_consistent():
    # the r^alpha load converges: two meshes agree on the coarse element sums
    p = canonical_geometry("lshape")
    sol = solution_for(p, 2 / 3)
    m = initial_mesh(p, elements_per_edge=2)
    fine = refine_uniform(m)
    b = assemble_rhs_symm(m, sol).values
    bf = assemble_rhs_symm(fine, sol).values
    assert np.allclose(b, bf[0::2] + bf[1::2], atol=1e-9)


def test_W_kernel_symmetry_and_semidefinite():
    m = _square(2)
    W = assemble_W(m).values
    assert np.allclose(W, W.T, atol=0)
    assert np.max(np.abs(W.sum(axis=1))) < 1e-14
    ev = np.linalg.eigvalsh(W)
    assert abs(ev[0]) < 1e-12
    assert ev[1] > 1e-6


def test_W_is_congruence_of_V(canonical):
    m = initial_mesh(canonical, elements_per_edge=2)
    V = assemble_V(m).values
    D = slope_matrix(m)
    assert np.allclose(assemble_W(m).values, D.T @ V @ D, atol=1e-12)


def test_stabilization_makes_W_positive_definite(canonical):
    m = initial_mesh(canonical, elements_per_edge=3)
    A = assemble_W(m).values + assemble_stabilization(m).values
    assert np.min(np.linalg.eigvalsh(A)) > 0


def test_hat_integrals_sum_to_perimeter(canonical):
    m = refine_uniform(initial_mesh(canonical, elements_per_edge=2))
    a = hat_integrals(m)
    assert math.fsum(a) == pytest.approx(canonical.perimeter, rel=1e-14)
    assert np.allclose(assemble_stabilization(m).values, np.outer(a, a))


def test_hypsing_rhs_of_linear_flux_is_W_times_nodes(canonical):
    m = initial_mesh(canonical, elements_per_edge=3)
    sol = SingularSolution(1.0, 0.0, (0.0, 0.0))
    b = assemble_rhs_hypsing(m, sol).values
    W = assemble_W(m).values
    assert np.allclose(b, W @ m.nodes[:, 0], atol=1e-10)


def test_hypsing_rhs_is_compatible():
    # <(1/2 - K') phi, 1> = <phi, 1> = 0 for the normal derivative of a harmonic function
    p = canonical_geometry("lshape")
    m = initial_mesh(p, elements_per_edge=4)
    b = assemble_rhs_hypsing(m, solution_for(p, 2 / 3)).values
    assert abs(math.fsum(b)) < 1e-9


def test_dump_matrix_round_trip(tmp_path):
    V = assemble_V(_square(2)).values
    path = tmp_path / "V.txt"
    dump_matrix(V, path)
    back = np.loadtxt(path)
    assert np.array_equal(back, V)
    assert len(path.read_text().splitlines()) == V.shape[0]


def test_user_polygon_assembles():
    p = Polygon(np.array([[0, 0], [0.4, 0], [0.3, 0.2], [0.1, 0.3]]))
    m = initial_mesh(p, target_h=0.05)
    V = assemble_V(m).values
    assert np.min(np.linalg.eigvalsh(V)) > 0


def test_unit_panel_self_entry():
    a, b = np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]])
    assert single_layer_matrix(a, b)[0, 0] == pytest.approx(3 / (4 * math.pi), rel=1e-14)


def test_zero_data_gives_zero_loads(canonical):
    m = initial_mesh(canonical, elements_per_edge=2)
    assert not np.any(assemble_rhs_symm(m, lambda x: np.zeros(len(x))).values)
    assert not np.any(assemble_rhs_hypsing(m, lambda x, n: np.zeros(len(x))).values)


def test_stabilization_on_uniform_mesh():
    m = _square(3)
    h = m.lengths[0]
    a = hat_integrals(m)
    assert np.allclose(a, h, rtol=1e-14)
    v = np.zeros(m.n_elements)
    v[0], v[5] = 1.0, -1.0
    assert np.allclose(assemble_stabilization(m).values @ v, 0.0, atol=1e-16)


def test_hypsing_rhs_linear_flux_is_compatible():
    m = _square(4)
    b = assemble_rhs_hypsing(m, SingularSolution(1.0)).values
    assert abs(math.fsum(b)) < 1e-12
