import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bemlocal.geometry import canonical_geometry, initial_mesh
from bemlocal.quadrature import gauss_rule, jacobi_rule
from bemlocal.solutions import SingularSolution, SolutionError, eval_flux, eval_trace, solution_for

alphas = st.sampled_from([1 / 8, 1 / 3, 2 / 3, 1.0, 1.5])


def test_trace_examples():
    s = SingularSolution(0.5, 0.0, (0.0, 0.0))
    assert eval_trace(s, (4.0, 0.0)) == pytest.approx(2.0)
    # theta = pi/2: 1 * cos(pi/4)
    assert eval_trace(s, (0.0, 1.0)) == pytest.approx(math.sqrt(0.5))
    assert eval_trace(s, (0.0, 0.0)) == 0.0


def test_linear_solution_is_x():
    s = SingularSolution(1.0)
    x = np.array([[0.3, -0.2], [-0.1, 0.4]])
    assert np.allclose(s.trace(x), x[:, 0])
    assert np.allclose(s.gradient(x), [[1, 0], [1, 0]])
    assert eval_flux(s, (0.2, 0.1), (0.6, 0.8)) == pytest.approx(0.6)


def test_nonpositive_alpha_rejected():
    with pytest.raises(SolutionError):
        SingularSolution(0.0)


def test_gradient_at_center_rejected():
    with pytest.raises(SolutionError):
        SingularSolution(1 / 3).gradient(np.zeros(2))


def _sample_point(r, ang):
    return np.array([r * math.cos(ang), r * math.sin(ang)])


@given(alpha=alphas, theta0=st.floats(-3, 3), r=st.floats(0.05, 0.5), ang=st.floats(-2.5, 2.5))
def test_harmonic_by_finite_differences(alpha, theta0, r, ang):
    s = SingularSolution(alpha, theta0, (0.1, -0.2))
    x = np.array(s.center) + _sample_point(r, theta0 + ang)
    h = 1e-3 * r
    e = np.eye(2) * h
    lap = sum(s.trace(x + e[k]) + s.trace(x - e[k]) for k in range(2)) - 4 * s.trace(x)
    scale = alpha * r ** (alpha - 2) * h * h
    assert abs(lap) <= 1e-4 * scale + 1e-12


@given(alpha=alphas, theta0=st.floats(-3, 3), r=st.floats(0.05, 0.5), ang=st.floats(-2.5, 2.5))
def test_gradient_by_finite_differences(alpha, theta0, r, ang):
    s = SingularSolution(alpha, theta0, (0.0, 0.0))
    x = _sample_point(r, theta0 + ang)
    h = 1e-6 * r
    fd = np.array([(s.trace(x + d) - s.trace(x - d)) / (2 * h) for d in np.eye(2) * h])
    g = s.gradient(x)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-8 * alpha * r ** (alpha - 1))


def test_solution_for_places_center_at_singular_corner(canonical):
    s = solution_for(canonical, 1 / 3)
    j = canonical.singular_vertex
    assert np.allclose(s.center, canonical.vertices[j])
    # the bisector points into the domain, so u > 0 slightly along it
    probe = np.array(s.center) + 1e-3 * np.array([math.cos(s.theta0), math.sin(s.theta0)])
    assert s.trace(probe) > 0


def test_branch_cut_avoids_boundary(canonical):
    s = solution_for(canonical, 1 / 8)
    m = initial_mesh(canonical, elements_per_edge=8)
    s.check_branch(m.element_points(np.linspace(0, 1, 11)).reshape(-1, 2))


def test_branch_cut_detection():
    s = SingularSolution(0.5, 0.0, (0.0, 0.0))
    with pytest.raises(SolutionError, match="branch"):
        s.check_branch(np.array([[-1.0, 0.0]]))


@pytest.mark.parametrize("name", ["lshape", "zshape"])
def test_trace_vanishes_on_edges_at_corner_when_alpha_matches(name):
    # with alpha = pi / omega the solution vanishes on both edges at the corner
    p = canonical_geometry(name)
    j = p.singular_vertex
    omega = p.interior_angles[j]
    s = solution_for(p, math.pi / omega)
    v = p.vertices
    for nb in (v[j - 1], v[(j + 1) % p.n_vertices]):
        mid = 0.5 * (v[j] + nb)
        assert abs(float(s.trace(mid))) < 1e-12


@pytest.mark.parametrize("alpha", [1 / 3, 2 / 3, 1.0])
def test_total_flux_vanishes(canonical, alpha):
    # int_Gamma du/dn = 0 for harmonic u; composite Gauss away from the corner, Jacobi near it
    s = solution_for(canonical, alpha)
    m = initial_mesh(canonical, elements_per_edge=64)
    t, w = gauss_rule(8).on_unit()
    total = 0.0
    corner = np.array(s.center)
    for k in range(m.n_elements):
        a, b = m.starts[k], m.ends[k]
        L = m.lengths[k]
        if np.allclose(a, corner):
            jt, jw = jacobi_rule(8, alpha - 1)
            pts = a + jt[:, None] * (b - a)
            vals = s.flux(pts, np.broadcast_to(m.normals[k], pts.shape)) / (jt * L) ** (alpha - 1)
            total += L**alpha * float(jw @ vals)
        elif np.allclose(b, corner):
            jt, jw = jacobi_rule(8, alpha - 1)
            pts = b + jt[:, None] * (a - b)
            vals = s.flux(pts, np.broadcast_to(m.normals[k], pts.shape)) / (jt * L) ** (alpha - 1)
            total += L**alpha * float(jw @ vals)
        else:
            pts = a + t[:, None] * (b - a)
            total += L * float(w @ s.flux(pts, np.broadcast_to(m.normals[k], pts.shape)))
    assert abs(total) < 1e-10


def test_quadratic_solution_examples():
    s = SingularSolution(2.0)
    assert eval_trace(s, (0.3, 0.2)) == pytest.approx(0.05)
    assert eval_flux(s, (0.3, 0.2), (0.0, 1.0)) == pytest.approx(-0.4)
    assert eval_flux(SingularSolution(1.0), (0.3, 0.4), (0.0, 1.0)) == pytest.approx(0.0)
