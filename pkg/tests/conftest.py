import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bemlocal.geometry import canonical_geometry, initial_mesh

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(params=["lshape", "zshape", "square"])
def canonical(request):
    return canonical_geometry(request.param)


@pytest.fixture
def small_meshes():
    """Meshes with at most 16 elements, one per canonical geometry."""
    return [
        initial_mesh(canonical_geometry("square"), elements_per_edge=4),
        initial_mesh(canonical_geometry("lshape"), elements_per_edge=2),
        initial_mesh(canonical_geometry("zshape"), elements_per_edge=2),
    ]


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
