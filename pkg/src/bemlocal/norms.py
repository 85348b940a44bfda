"""Error norms and experimental orders of convergence.

Local negative-order errors are measured as ``sqrt(<V (chi e), chi e>)``:
the error on the chosen elements is projected onto piecewise constants
of a finer subdivision and the single-layer quadratic form is summed
without storing the fine matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import backend
from .geometry import BoundaryMesh, BoundaryRegion
from .quadrature import INV_2PI, gauss_rule, jacobi_rule
from .solutions import SingularSolution

__all__ = [
    "NormError",
    "ErrorRecord",
    "ErrorDensity",
    "flux_error",
    "tangential_error",
    "l2_error",
    "fine_projection",
    "neg_half_norm_local",
    "energy_error_global",
    "pythagoras_energy",
    "h1_seminorm_error_local",
    "fit_eoc",
    "pairwise_eoc",
]

ACCURATE_ORDER = 8


class NormError(ValueError):
    pass


@dataclass
class ErrorRecord:
    """Error norms measured on one mesh of a refinement sequence."""

    level: int
    N: int
    h: float
    norms: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, val in self.norms.items():
            if not val >= 0:
                raise NormError(f"norm {name!r} must be nonnegative, got {val}")


@dataclass(frozen=True)
class ErrorDensity:
    """A pointwise error ``e(x)`` defined element by element on ``mesh``.

    ``func(points, elements)`` evaluates ``e`` at points lying inside the
    given elements. ``singular_point`` and ``exponent`` describe an
    ``r**exponent`` blow-up at a mesh node, used by the accurate projection.
    """

    mesh: BoundaryMesh
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    singular_point: tuple[float, float] | None = None
    exponent: float | None = None

    def __call__(self, points, elements) -> np.ndarray:
        return np.asarray(self.func(points, elements), dtype=float)

    @classmethod
    def piecewise_constant(cls, m: BoundaryMesh, values) -> "ErrorDensity":
        v = np.asarray(values, dtype=float)
        if v.shape != (m.n_elements,):
            raise NormError(f"need one value per element ({m.n_elements}), got {v.shape}")
        return cls(m, lambda pts, elem: v[elem])


def _flux_callable(exact):
    if isinstance(exact, SingularSolution):
        return exact.flux
    return exact


def flux_error(m: BoundaryMesh, phi_h, exact) -> ErrorDensity:
    """``phi - phi_h`` for a piecewise-constant ``phi_h``.

    ``exact`` is a :class:`SingularSolution` (its flux is used) or a
    callable ``flux(points, normals)``.
    """
    ph = np.asarray(phi_h, dtype=float)
    if ph.shape != (m.n_elements,):
        raise NormError(f"phi_h must have {m.n_elements} entries, got {ph.shape}")
    fl = _flux_callable(exact)
    normals = m.normals

    def e(pts, elem):
        return fl(pts, normals[elem]) - ph[elem]

    if isinstance(exact, SingularSolution):
        return ErrorDensity(m, e, exact.center, exact.alpha - 1.0)
    return ErrorDensity(m, e)


def tangential_error(m: BoundaryMesh, u_h, exact: SingularSolution) -> ErrorDensity:
    """``d/ds (u - u_h)`` for a nodal (piecewise-linear) ``u_h``."""
    u = np.asarray(u_h, dtype=float)
    if u.shape != (m.n_elements,):
        raise NormError(f"u_h must have {m.n_elements} nodal values, got {u.shape}")
    slope = (np.roll(u, -1) - u) / m.lengths
    tangents = m.tangents

    def e(pts, elem):
        return exact.flux(pts, tangents[elem]) - slope[elem]

    return ErrorDensity(m, e, exact.center, exact.alpha - 1.0)


def _region_elements(m: BoundaryMesh, region: BoundaryRegion | None) -> np.ndarray:
    if region is None:
        return np.arange(m.n_elements)
    idx = region.elements(m)
    if len(idx) == 0:
        raise NormError("region is empty on this mesh")
    return idx


def _gauss_sq_integral(m, idx, values_fn) -> float:
    t, w = gauss_rule(2).on_unit()
    pts = m.element_points(t)[idx]
    elem = np.repeat(idx, len(t))
    vals = values_fn(pts.reshape(-1, 2), elem).reshape(len(idx), len(t))
    per_elem = m.lengths[idx] * (vals**2 @ w)
    return math.fsum(per_elem)


def l2_error(m: BoundaryMesh, phi_h, exact, region: BoundaryRegion | None) -> float:
    """``||phi - phi_h||_{L2(region)}`` by 2-point Gauss on every element.

    ``region=None`` means the whole boundary; that is only meaningful when
    the flux is square integrable.
    """
    idx = _region_elements(m, region)
    e = flux_error(m, phi_h, exact)
    return math.sqrt(_gauss_sq_integral(m, idx, e))


def h1_seminorm_error_local(m: BoundaryMesh, u_h, exact: SingularSolution, region: BoundaryRegion | None) -> float:
    """``||d/ds (u - u_h)||_{L2(region)}`` by 2-point Gauss."""
    idx = _region_elements(m, region)
    e = tangential_error(m, u_h, exact)
    return math.sqrt(_gauss_sq_integral(m, idx, e))


def _subdivide(m: BoundaryMesh, idx: np.ndarray, r: int):
    a = m.starts[idx]
    d = (m.ends - m.starts)[idx]
    k = np.arange(r)
    fs = a[:, None, :] + (k / r)[None, :, None] * d[:, None, :]
    fe = a[:, None, :] + ((k + 1) / r)[None, :, None] * d[:, None, :]
    return fs.reshape(-1, 2), fe.reshape(-1, 2), np.repeat(idx, r)


def fine_projection(
    e: ErrorDensity,
    elements: np.ndarray,
    refine_factor: int,
    projection: str = "gauss2",
):
    """Piecewise-constant projection of ``e`` on a subdivision of ``elements``.

    Every element is split into ``refine_factor`` equal pieces. With
    ``projection="gauss2"`` each piece's mean is taken by 2-point Gauss;
    ``"accurate"`` uses higher-order Gauss and a Gauss-Jacobi rule on pieces
    ending at ``e.singular_point``.

    Returns
    -------
    starts, ends : ndarray, shape (M, 2)
    means : ndarray, shape (M,)
    """
    if refine_factor < 1:
        raise NormError("refine_factor must be >= 1")
    m = e.mesh
    fs, fe, parent = _subdivide(m, np.asarray(elements, dtype=np.int64), int(refine_factor))
    if projection == "gauss2":
        t, w = gauss_rule(2).on_unit()
    elif projection == "accurate":
        t, w = gauss_rule(ACCURATE_ORDER).on_unit()
    else:
        raise NormError(f"unknown projection {projection!r}")
    nq = len(t)
    T = np.tile(t, (len(fs), 1))
    Wt = np.tile(w, (len(fs), 1))
    if projection == "accurate" and e.singular_point is not None and e.exponent is not None:
        sp = np.asarray(e.singular_point, dtype=float)
        jt, jw = jacobi_rule(ACCURATE_ORDER, float(e.exponent))
        jw = jw / jt**e.exponent
        for k in np.flatnonzero(np.all(np.abs(fs - sp) <= 1e-14, axis=1)):
            T[k], Wt[k] = jt, jw
        for k in np.flatnonzero(np.all(np.abs(fe - sp) <= 1e-14, axis=1)):
            T[k], Wt[k] = 1.0 - jt, jw
    pts = fs[:, None, :] + T[:, :, None] * (fe - fs)[:, None, :]
    vals = e(pts.reshape(-1, 2), np.repeat(parent, nq)).reshape(len(fs), nq)
    means = np.sum(vals * Wt, axis=1)
    return fs, fe, means


def _v_quadform(starts, ends, w) -> float:
    return -INV_2PI * backend.slp_quadform(starts, ends, w)


def neg_half_norm_local(
    e: ErrorDensity,
    region: BoundaryRegion | None,
    refine_factor: int = 4,
    projection: str = "gauss2",
) -> float:
    """``sqrt(<V (chi e), chi e>)`` with ``chi`` the indicator of ``region``.

    Parameters
    ----------
    e : ErrorDensity
        Error on the mesh ``e.mesh``.
    region : BoundaryRegion or None
        Elements carrying the cut-off; ``None`` is the whole boundary.
    refine_factor : int
        Each region element is split this many times for the projection.
    projection : {"gauss2", "accurate"}
        How piece means are computed, see :func:`fine_projection`.
    """
    idx = _region_elements(e.mesh, region)
    fs, fe, w = fine_projection(e, idx, refine_factor, projection)
    if not np.any(w):
        return 0.0
    q = _v_quadform(fs, fe, w)
    if q < 0:
        # round-off only: V is positive definite on diameter < 1 polygons
        if q < -1e-12 * _v_quadform(fs, fe, np.abs(w)):
            raise NormError(f"negative single-layer energy {q:.3e}")
        return 0.0
    return math.sqrt(q)


def energy_error_global(
    m: BoundaryMesh,
    phi_h,
    exact,
    refine_factor: int = 2,
    projection: str = "accurate",
) -> float:
    """``sqrt(<V e, e>)`` for ``e = phi - phi_h`` on the whole boundary.

    The default projection integrates the corner singularity accurately;
    see :func:`fine_projection`.
    """
    return neg_half_norm_local(flux_error(m, phi_h, exact), None, refine_factor, projection)


def pythagoras_energy(V, phi_h, vphi_phi: float) -> float:
    """``sqrt(<V phi, phi> - <V phi_h, phi_h>)`` given ``<V phi, phi>``."""
    ph = np.asarray(phi_h, dtype=float)
    d = float(vphi_phi) - float(ph @ (np.asarray(V) @ ph))
    return math.sqrt(max(d, 0.0))


def _series(records: Sequence[ErrorRecord], name: str):
    N = np.array([r.N for r in records], dtype=float)
    try:
        err = np.array([r.norms[name] for r in records], dtype=float)
    except KeyError:
        raise NormError(f"no norm named {name!r} in the records") from None
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise NormError(f"errors for {name!r} must be positive and finite for a rate fit")
    return N, err


def fit_eoc(records: Sequence[ErrorRecord], name: str, window: int | None = None) -> float:
    """Least-squares rate ``-d log(err) / d log(N)`` over the last ``window`` records."""
    recs = list(records) if window is None else list(records)[-window:]
    if len(recs) < 2:
        raise NormError("need at least two records for a rate fit")
    N, err = _series(recs, name)
    x = np.log(N)
    y = np.log(err)
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    return 0.0 - slope


def pairwise_eoc(records: Sequence[ErrorRecord], name: str) -> list[float | None]:
    """Rate between consecutive records (``None`` for the first)."""
    out: list[float | None] = [None]
    for prev, cur in zip(records[:-1], records[1:]):
        a, b = prev.norms[name], cur.norms[name]
        if a > 0 and b > 0:
            out.append(-math.log(b / a) / math.log(cur.N / prev.N))
        else:
            out.append(float("nan"))
    return out
