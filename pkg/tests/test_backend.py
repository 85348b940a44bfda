import numpy as np
import pytest

from bemlocal import _kernels_py, backend
from bemlocal.geometry import canonical_geometry, initial_mesh, refine_uniform
from bemlocal.operators import assemble_rhs_hypsing, assemble_rhs_symm, assemble_V
from bemlocal.solutions import solution_for

compiled = pytest.mark.skipif("compiled" not in backend.available(), reason="compiled extension not built")


@pytest.fixture
def restore_backend():
    name = backend.NAME
    yield
    backend.use(name)


def _mesh(name="lshape", levels=2):
    m = initial_mesh(canonical_geometry(name), elements_per_edge=3)
    for _ in range(levels):
        m = refine_uniform(m)
    return m


def test_python_fallback_is_always_available():
    assert "python" in backend.available()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        backend.use("fortran")


@compiled
@pytest.mark.parametrize("name", ["lshape", "zshape"])
def test_backends_agree_on_operators(name, restore_backend):
    m = _mesh(name)
    sol = solution_for(m.polygon, 1 / 3)
    out = {}
    for which in ("compiled", "python"):
        backend.use(which)
        out[which] = (
            assemble_V(m).values,
            assemble_rhs_symm(m, sol).values,
            assemble_rhs_hypsing(m, sol).values,
        )
    for a, b in zip(out["compiled"], out["python"]):
        assert np.allclose(a, b, rtol=0, atol=1e-13 * np.max(np.abs(b)))


@compiled
def test_backends_agree_on_quadform(restore_backend):
    m = _mesh("zshape", 3)
    w = np.random.default_rng(0).normal(size=m.n_elements)
    backend.use("compiled")
    qc = backend.slp_quadform(m.starts, m.ends, w)
    qp = _kernels_py.slp_quadform(m.starts, m.ends, w)
    assert qc == pytest.approx(qp, rel=1e-13)


@compiled
def test_thread_count_does_not_change_results(restore_backend):
    backend.use("compiled")
    m = _mesh("lshape", 3)
    w = np.random.default_rng(1).normal(size=m.n_elements)
    results = []
    for n in (1, 3):
        backend.set_threads(n)
        results.append((backend.slp_matrix(m.starts, m.ends, m.starts, m.ends, True), backend.slp_quadform(m.starts, m.ends, w)))
    backend.set_threads(1)
    assert np.array_equal(results[0][0], results[1][0])
    assert results[0][1] == results[1][1]


@compiled
def test_thread_count_does_not_change_loads(restore_backend):
    # repeated runs give a race in the per-row scratch variables a chance to show
    backend.use("compiled")
    p = canonical_geometry("lshape")
    m = _mesh("lshape", 2)
    sol = solution_for(p, 1 / 8)
    backend.set_threads(1)
    ref_s = assemble_rhs_symm(m, sol).values
    ref_h = assemble_rhs_hypsing(m, sol).values
    backend.set_threads(4)
    try:
        for _ in range(20):
            assert np.array_equal(assemble_rhs_symm(m, sol).values, ref_s)
            assert np.array_equal(assemble_rhs_hypsing(m, sol).values, ref_h)
    finally:
        backend.set_threads(1)
