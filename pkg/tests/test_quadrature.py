import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bemlocal import _kernels_py, backend
from bemlocal.quadrature import (
    INV_2PI,
    QuadratureError,
    adaptive_quad,
    gauss_rule,
    graded_rule,
    green_log,
    jacobi_rule,
    log_moment_oracle,
    panel_dlp_kernel,
    panel_dlp_moments,
    panel_log_moment,
    slp_pair_oracle,
)

coord = st.floats(-1.0, 1.0, allow_nan=False)
point = st.tuples(coord, coord).map(np.array)


def test_green_log_values():
    assert green_log((0, 0), (1, 0)) == 0.0
    assert green_log((0, 0), (math.e, 0)) == pytest.approx(-0.1591549, abs=1e-7)
    with pytest.raises(QuadratureError):
        green_log((0.3, 0.2), (0.3, 0.2))


@given(point, point)
def test_green_log_symmetric(x, y):
    if np.allclose(x, y, atol=1e-300, rtol=0):
        return
    if math.hypot(*(x - y)) == 0:
        return
    assert green_log(x, y) == green_log(y, x)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
def test_gauss_rule_exactness(n):
    r = gauss_rule(n)
    assert math.fsum(r.weights) == pytest.approx(2.0, abs=1e-13)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert float(np.dot(r.weights, r.nodes**k)) == pytest.approx(exact, abs=1e-13)


def test_gauss_two_point_closed_form():
    r = gauss_rule(2)
    np.testing.assert_allclose(np.sort(r.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], atol=1e-15)
    assert float(np.dot(r.weights, r.nodes**3)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("beta", [-2 / 3, -7 / 8, 1 / 3, 1 / 8])
def test_jacobi_rule_integrates_power(beta):
    t, w = jacobi_rule(8, beta)
    # int_0^1 t^beta t^k dt = 1 / (beta + k + 1)
    for k in range(10):
        assert float(np.dot(w, t**k)) == pytest.approx(1.0 / (beta + k + 1), rel=1e-12)


def test_panel_log_moment_examples():
    assert panel_log_moment((0, 0), (1, 0), (0, 0)) == pytest.approx(-1.0, abs=1e-15)
    assert panel_log_moment((0, 0), (1, 0), (0.5, 0)) == pytest.approx(math.log(0.5) - 1, abs=1e-14)
    # oracle value frozen from adaptive quadrature of log|10 - t| on [0, 1]
    assert panel_log_moment((0, 0), (1, 0), (10, 0)) == pytest.approx(2.2508297339144825, abs=1e-10)


@settings(max_examples=1000)
@given(a=point, b=point, x=point, on_panel=st.floats(-0.5, 1.5), use_on=st.booleans())
def test_panel_log_moment_matches_oracle(a, b, x, on_panel, use_on):
    L = math.hypot(*(b - a))
    if L < 1e-3:
        return
    if use_on:
        x = a + on_panel * (b - a)
    oracle = log_moment_oracle(a, b, x, 1e-12)
    assert panel_log_moment(a, b, x) == pytest.approx(oracle, abs=1e-10)


def test_panel_dlp_kernel_examples():
    assert panel_dlp_kernel((0, 0), (0, 1), (0.7, 0)) == 0.0
    assert panel_dlp_kernel((0, 0), (0, 1), (0, 1)) == pytest.approx(INV_2PI)
    assert panel_dlp_kernel((0, 0), (0, 1), (1, 1)) == pytest.approx(0.0795775, abs=1e-7)
    with pytest.raises(QuadratureError):
        panel_dlp_kernel((0.1, 0.1), (0, 1), (0.1, 0.1))


@given(a=point, b=point, p=point)
def test_dlp_moments_match_quadrature(a, b, p):
    L = math.hypot(*(b - a))
    if L < 1e-2:
        return
    d = b - a
    # keep p away from the panel so plain adaptive quadrature is reliable
    ts = np.clip(np.dot(p - a, d) / L**2, 0, 1)
    if math.hypot(*(p - (a + ts * d))) < 1e-2:
        return
    m0, m1 = panel_dlp_moments(a, b, p)
    for comp in range(2):
        def f(t, comp=comp, w=0):
            y = a[None, :] + t[:, None] * d[None, :]
            r = y - p[None, :]
            return r[:, comp] / np.sum(r * r, axis=1) * (t if w else 1.0)

        q0 = L * adaptive_quad(f, 0, 1, 1e-12)
        q1 = L * adaptive_quad(lambda t: f(t, w=1), 0, 1, 1e-12)
        assert m0[comp] == pytest.approx(q0, abs=1e-9)
        assert m1[comp] == pytest.approx(q1, abs=1e-9)


def test_adaptive_quad_examples():
    assert adaptive_quad(lambda t: t**3, 0, 1, 1e-12) == pytest.approx(0.25, abs=1e-14)
    assert adaptive_quad(np.log, 0, 1, 1e-10) == pytest.approx(-1.0, abs=1e-10)
    assert adaptive_quad(lambda t: np.ones_like(t), 0, 1) == pytest.approx(1.0, abs=1e-15)


def test_adaptive_quad_budget():
    with pytest.raises(QuadratureError, match="subintervals"):
        adaptive_quad(lambda t: t**-0.99, 0, 1, 1e-14, max_subintervals=64)


def test_adaptive_quad_non_finite():
    with np.errstate(divide="ignore"):
        with pytest.raises(QuadratureError, match="non-finite"):
            adaptive_quad(lambda t: 1.0 / (t - 0.5), 0, 1, 1e-10, points=[0.5, 0.5 + 1e-300])


def test_graded_rule_near_singularity():
    # int_0^1 log(t + 1e-6) dt, singularity just outside the left end
    eps = 1e-6
    t, w = graded_rule(lambda s, e: s + eps, n=8)
    exact = (1 + eps) * math.log(1 + eps) - eps * math.log(eps) - 1
    assert float(np.dot(w, np.log(t + eps))) == pytest.approx(exact, abs=1e-12)


def test_graded_rule_power_end():
    beta = -2 / 3
    t, w = graded_rule(lambda s, e: 1.0, n=8, singular_end=0, singular_exponent=beta)
    assert float(np.dot(w, t**beta)) == pytest.approx(3.0, rel=1e-12)


# Oracle values below were produced once with slp_pair_oracle at tol 1e-13.
PAIR_CASES = [
    ((0, 0), (1, 0), (0, 0), (1, 0), -1.5),
    ((0, 0), (1, 0), (10, 0), (11, 0), 2.301750087013734),
    ((0, 0), (1, 0), (0, 0), (0, 1), -0.368028246322579),
    ((0, 0), (1, 0), (0.3, 0.2), (0.9, 0.7), -0.492679560117671),
    ((0, 0), (0.5, 0), (0.2, 0.001), (0.7, 0.001), -0.45124497227871846),
]


@pytest.mark.parametrize("a,b,c,d,expected", PAIR_CASES)
def test_slp_pair_closed_form(a, b, c, d, expected):
    a, b, c, d = (np.array(v, dtype=float) for v in (a, b, c, d))
    assert float(_kernels_py.slp_pair_analytic(a, b, c, d)) == pytest.approx(expected, abs=1e-12)
    m = _kernels_py.slp_matrix(a[None], b[None], c[None], d[None])
    assert m[0, 0] == pytest.approx(expected, abs=1e-11)


def test_slp_pair_oracle_self_entry():
    assert slp_pair_oracle((0, 0), (1, 0), (0, 0), (1, 0), 1e-11) == pytest.approx(-1.5, abs=1e-10)


@given(a=point, b=point, c=point, d=point)
@settings(max_examples=60)
def test_slp_pair_closed_form_vs_tensor_gauss_far(a, b, c, d):
    # well-separated panels: high-order tensor Gauss is an independent reference
    c = c + 6.0
    d = d + 6.0
    if min(math.hypot(*(b - a)), math.hypot(*(d - c))) < 1e-3:
        return
    t, w = gauss_rule(20).on_unit()
    X = a[None, :] + t[:, None] * (b - a)
    Y = c[None, :] + t[:, None] * (d - c)
    r = np.hypot(*(X[:, None, :] - Y[None, :, :]).transpose(2, 0, 1))
    ref = math.hypot(*(b - a)) * math.hypot(*(d - c)) * float(w @ np.log(r) @ w)
    assert float(_kernels_py.slp_pair_analytic(a, b, c, d)) == pytest.approx(ref, abs=1e-11)


@given(
    ang=st.floats(0.0, 2 * math.pi),
    tilt=st.floats(-13.0, -3.0),
    flip=st.booleans(),
    off=st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)),
    shrink=st.booleans(),
)
@settings(max_examples=12)
def test_slp_pair_nearly_parallel_matches_oracle(ang, tilt, flip, off, shrink):
    # tiny angles cancel badly in the parallelogram formula; both backends must stay accurate
    a = np.array([0.1, -0.2])
    b = a + 0.8 * np.array([math.cos(ang), math.sin(ang)])
    ang2 = ang + 10.0**tilt + (math.pi if flip else 0.0)
    c = a + np.array(off) * (1e-3 if shrink else 1.0)
    d = c + 0.6 * np.array([math.cos(ang2), math.sin(ang2)])
    ref = slp_pair_oracle(a, b, c, d, 1e-11)
    for kern in (_kernels_py, backend):
        got = kern.slp_matrix(a[None], b[None], c[None], d[None])[0, 0]
        assert got == pytest.approx(ref, abs=1e-10)
