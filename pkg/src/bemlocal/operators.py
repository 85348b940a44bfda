"""Galerkin matrices and load vectors for the single-layer and hypersingular equations.

Single-layer entries are exact double integrals of the log kernel
(closed form for nearby panel pairs, tensor Gauss for separated ones).
The hypersingular matrix is assembled from the single-layer matrix
through ``<W u, v> = <V u', v'>`` with arc-length derivatives, so the
constants lie in its kernel by construction.

Double-layer terms in the load vectors are integrated analytically
over one panel and by quadrature over the other. Panel pairs that
touch or nearly touch (only possible across polygon corners, since
same-edge contributions vanish) use a rule graded toward the closer
panel, and panels ending at the singular point of the data use a
Gauss-Jacobi rule matched to its power behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import backend
from ._kernels_py import _hypsing_nodes_sum, _symm_nodes_sum
from .geometry import BoundaryMesh
from .quadrature import INV_2PI, gauss_rule, graded_rule, jacobi_rule
from .solutions import SingularSolution

__all__ = [
    "OperatorError",
    "GalerkinMatrix",
    "CoefficientVector",
    "assemble_V",
    "assemble_W",
    "assemble_stabilization",
    "assemble_rhs_symm",
    "assemble_rhs_hypsing",
    "slope_matrix",
    "hat_integrals",
    "dump_matrix",
]

MID_ORDER = 8
FAR_ORDER = 4
# outer/inner panel pairs closer than NEAR_Q outer-panel lengths get a graded rule
NEAR_Q = 2.0
# deeper bisection would put nodes within rounding of the shared corner
GRADED_DEPTH = 30


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    """Dense Galerkin matrix on the P0 (per element) or P1 (per node) space."""

    values: np.ndarray
    space: str
    mesh: BoundaryMesh

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    values: np.ndarray
    space: str
    mesh: BoundaryMesh

    def __post_init__(self):
        n = self.mesh.n_elements
        if self.values.shape != (n,):
            raise OperatorError(f"{self.space} vector must have length {n}, got {self.values.shape}")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _check_diameter(m: BoundaryMesh) -> None:
    diam = m.polygon.diameter
    if diam >= 1.0:
        raise OperatorError(f"polygon diameter {diam:.6g} >= 1: single-layer operator not elliptic")


def single_layer_matrix(starts, ends) -> np.ndarray:
    """``V_ij = -(1/2pi) int_{T_i} int_{T_j} log|x - y|`` for raw panel arrays."""
    raw = backend.slp_matrix(starts, ends, starts, ends, True)
    return -INV_2PI * raw


def assemble_V(m: BoundaryMesh) -> GalerkinMatrix:
    _check_diameter(m)
    return GalerkinMatrix(single_layer_matrix(m.starts, m.ends), "P0", m)


def slope_matrix(m: BoundaryMesh) -> np.ndarray:
    """Dense map from nodal values to per-element arc-length slopes."""
    n = m.n_elements
    inv = 1.0 / m.lengths
    D = np.zeros((n, n))
    idx = np.arange(n)
    D[idx, idx] = -inv
    D[idx, (idx + 1) % n] += inv
    return D


def congruence_W(V: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """``D^T V D`` in O(N^2) using the two-diagonal structure of ``D``."""
    inv = 1.0 / lengths
    Vs = V * inv[:, None] * inv[None, :]
    # (Vs Delta)[:, j] = Vs[:, j-1] - Vs[:, j]
    VD = np.roll(Vs, 1, axis=1) - Vs
    W = np.roll(VD, 1, axis=0) - VD
    return 0.5 * (W + W.T)


def assemble_W(m: BoundaryMesh, V: GalerkinMatrix | None = None) -> GalerkinMatrix:
    _check_diameter(m)
    Vv = assemble_V(m).values if V is None else np.asarray(V)
    return GalerkinMatrix(congruence_W(Vv, m.lengths), "P1", m)


def hat_integrals(m: BoundaryMesh) -> np.ndarray:
    """``int_Gamma hat_i ds`` for every node."""
    ell = m.lengths
    return 0.5 * (ell + np.roll(ell, 1))


def assemble_stabilization(m: BoundaryMesh) -> GalerkinMatrix:
    a = hat_integrals(m)
    return GalerkinMatrix(np.outer(a, a), "P1", m)


# --------------------------------------------------------------------------
# per-panel quadrature for the load vectors
# --------------------------------------------------------------------------


def _is_power_exponent(beta: float | None) -> bool:
    """Whether ``r**beta`` needs a Gauss-Jacobi rule (non-integer or negative)."""
    if beta is None:
        return False
    return not (beta >= 0 and float(beta).is_integer())


@dataclass
class _Singularity:
    point: np.ndarray | None
    exponent: float | None

    def end_of(self, a, b) -> int | None:
        if self.point is None:
            return None
        if np.all(np.abs(a - self.point) <= 1e-14):
            return 0
        if np.all(np.abs(b - self.point) <= 1e-14):
            return 1
        return None


def _point_segment_distance(p, a, b):
    ab = b - a
    L2 = np.sum(ab * ab, axis=-1)
    t = np.clip(np.sum((p - a) * ab, axis=-1) / L2, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.hypot(*(p - proj).T) if p.ndim > 1 else float(np.hypot(*(p - proj)))


def _segment_distance(a, b, c, d) -> float:
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    return min(
        _point_segment_distance(a, c, d),
        _point_segment_distance(b, c, d),
        _point_segment_distance(c, a, b),
        _point_segment_distance(d, a, b),
    )


def _unit_rule(n: int, end: int | None, beta: float | None):
    """Rule on [0, 1]; Gauss-Jacobi toward ``end`` when ``r**beta`` is singular there."""
    if end is not None and _is_power_exponent(beta):
        t, w = jacobi_rule(n, float(beta))
        wt = w / t**beta
        return (t, wt) if end == 0 else (1.0 - t, wt)
    return gauss_rule(n).on_unit()


def _panel_rules(m: BoundaryMesh, sing: _Singularity, order: int):
    """Per-panel node arrays (CSR layout) for a rule of the given order."""
    starts, ends = m.starts, m.ends
    n = m.n_elements
    t0, w0 = gauss_rule(order).on_unit()
    t = np.tile(t0, (n, 1))
    w = np.tile(w0, (n, 1))
    if sing.point is not None and _is_power_exponent(sing.exponent):
        for end, pts in ((0, starts), (1, ends)):
            for k in np.flatnonzero(np.all(np.abs(pts - sing.point) <= 1e-14, axis=1)):
                t[k], w[k] = _unit_rule(order, end, sing.exponent)
    pts = starts[:, None, :] + t[:, :, None] * (ends - starts)[:, None, :]
    ptr = np.arange(n + 1, dtype=np.int64) * order
    return ptr, pts.reshape(-1, 2), w.reshape(-1)


def _near_pairs(m: BoundaryMesh):
    """Pairs ``(j, k)`` on different edges with ``dist(T_j, T_k) < NEAR_Q * L_k``."""
    mids, ell = m.midpoints, m.lengths
    tree = cKDTree(mids)
    radius = (NEAR_Q + 1.0) * float(np.max(ell))
    pairs = []
    for j, cand in enumerate(tree.query_ball_point(mids, radius)):
        for k in sorted(cand):
            if m.edge_ids[k] == m.edge_ids[j]:
                continue
            if _segment_distance(m.starts[j], m.ends[j], m.starts[k], m.ends[k]) < NEAR_Q * ell[k]:
                pairs.append((j, k))
    return pairs


def _csr(pairs, n):
    ptr = np.zeros(n + 1, dtype=np.int64)
    idx = []
    for j, k in pairs:
        ptr[j + 1] += 1
    ptr = np.cumsum(ptr)
    idx = np.array([k for _, k in sorted(pairs)], dtype=np.int64)
    return ptr, idx


def _graded_pair_rule(m: BoundaryMesh, k: int, j: int, sing: _Singularity):
    """Rule on outer panel ``k`` graded toward panel ``j`` (parameter space [0, 1])."""
    a, b = m.starts[k], m.ends[k]
    c, d = m.starts[j], m.ends[j]
    L = m.lengths[k]

    def dist(s, t):
        return _segment_distance(a + s * (b - a), a + t * (b - a), c, d) / L

    end = sing.end_of(a, b)
    beta = sing.exponent if _is_power_exponent(sing.exponent) else None
    return graded_rule(
        dist, n=MID_ORDER, ratio=1.0, max_depth=GRADED_DEPTH, singular_end=end, singular_exponent=beta
    )


def _resolve_singularity(func, singular_point, singular_exponent, kind):
    if isinstance(func, SingularSolution):
        s = func
        point = np.array(s.center) if singular_point is None else singular_point
        if kind == "trace":
            return s.trace, _Singularity(np.asarray(point, float), s.alpha if singular_exponent is None else singular_exponent)
        return s.flux, _Singularity(np.asarray(point, float), s.alpha - 1.0 if singular_exponent is None else singular_exponent)
    pt = None if singular_point is None else np.asarray(singular_point, float)
    return func, _Singularity(pt, singular_exponent)


def _force_mid(m: BoundaryMesh, sing: _Singularity) -> np.ndarray:
    if sing.point is None:
        return np.zeros(m.n_elements, dtype=bool)
    dist = _point_segment_distance(np.broadcast_to(sing.point, m.starts.shape), m.starts, m.ends)
    return dist < backend.DLP_FAR_Q * m.lengths


def element_integrals(m: BoundaryMesh, func, sing: _Singularity, order: int = MID_ORDER, weights=None):
    """``int_{T_k} func * phi ds`` for local weight polynomials ``phi`` (default 1).

    ``func(points, normals)`` is evaluated with every element's normal.
    Returns shape ``(N,)`` or ``(N, len(weights))``.
    """
    ptr, pts, wts = _panel_rules(m, sing, order)
    counts = np.diff(ptr)
    panel = np.repeat(np.arange(m.n_elements), counts)
    vals = func(pts, m.normals[panel]) * wts * m.lengths[panel]
    tloc = _local_param(m, pts, panel)
    if weights is None:
        return np.bincount(panel, vals, minlength=m.n_elements)
    return np.column_stack([np.bincount(panel, vals * wf(tloc), minlength=m.n_elements) for wf in weights])


def _local_param(m, pts, panel):
    rel = pts - m.starts[panel]
    return np.sum(rel * m.tangents[panel], axis=1) / m.lengths[panel]


def assemble_rhs_symm(
    m: BoundaryMesh,
    g: Callable | SingularSolution,
    singular_point=None,
    singular_exponent: float | None = None,
) -> CoefficientVector:
    """Loads ``b_j = int_{T_j} (g/2 + K g) ds`` for the Dirichlet-data equation.

    ``g`` maps an ``(M, 2)`` point array to trace values. If the trace
    behaves like ``r**beta`` at a mesh node, pass that node and ``beta``
    (automatic for a :class:`SingularSolution`).
    """
    gfun, sing = _resolve_singularity(g, singular_point, singular_exponent, "trace")

    def trace(pts, normals):
        return np.asarray(gfun(pts), dtype=float)

    n = m.n_elements
    mass = element_integrals(m, trace, sing)
    normals = m.normals
    mid_ptr, mid_pts, mid_w = _panel_rules(m, sing, MID_ORDER)
    far_ptr, far_pts, far_w = _panel_rules(m, sing, FAR_ORDER)
    mid_panel = np.repeat(np.arange(n), np.diff(mid_ptr))
    far_panel = np.repeat(np.arange(n), np.diff(far_ptr))
    mid_w = mid_w * m.lengths[mid_panel] * trace(mid_pts, None)
    far_w = far_w * m.lengths[far_panel] * trace(far_pts, None)
    pairs = _near_pairs(m)
    skip_ptr, skip_idx = _csr(pairs, n)
    far = backend.dlp_symm_apply(
        m.starts, m.ends, m.edge_ids, m.midpoints, m.lengths, m.edge_ids, normals,
        _force_mid(m, sing), mid_ptr, mid_pts, mid_w, far_ptr, far_pts, far_w, skip_ptr, skip_idx,
    )
    near = np.zeros(n)
    for j, k in pairs:
        t, w = _graded_pair_rule(m, k, j, sing)
        y = m.starts[k] + t[:, None] * (m.ends[k] - m.starts[k])
        wk = w * m.lengths[k] * trace(y, None)
        near[j] += _symm_nodes_sum(m.starts[j], m.ends[j], y, np.broadcast_to(normals[k], y.shape), wk)
    values = 0.5 * mass + INV_2PI * (far + near)
    return CoefficientVector(values, "P0", m)


def assemble_rhs_hypsing(
    m: BoundaryMesh,
    flux: Callable | SingularSolution,
    singular_point=None,
    singular_exponent: float | None = None,
) -> CoefficientVector:
    """Loads ``b_i = <flux/2 - K' flux, hat_i>`` for the Neumann-data equation.

    ``flux(points, normals)`` returns the normal derivative; it may jump at
    polygon corners since it is only evaluated inside elements.
    """
    ffun, sing = _resolve_singularity(flux, singular_point, singular_exponent, "flux")

    def fl(pts, normals):
        return np.asarray(ffun(pts, normals), dtype=float)

    n = m.n_elements
    normals = m.normals
    halves = element_integrals(m, fl, sing, weights=(lambda t: 1.0 - t, lambda t: t))
    mass = halves[:, 0] + np.roll(halves[:, 1], 1)
    mid_ptr, mid_pts, mid_w = _panel_rules(m, sing, MID_ORDER)
    far_ptr, far_pts, far_w = _panel_rules(m, sing, FAR_ORDER)
    mid_panel = np.repeat(np.arange(n), np.diff(mid_ptr))
    far_panel = np.repeat(np.arange(n), np.diff(far_ptr))
    mid_w = mid_w * m.lengths[mid_panel] * fl(mid_pts, normals[mid_panel])
    far_w = far_w * m.lengths[far_panel] * fl(far_pts, normals[far_panel])
    # pairs (k inner analytic, j outer quadrature)
    pairs = _near_pairs(m)
    skip_ptr, skip_idx = _csr(pairs, n)
    r0, r1 = backend.dlp_hypsing_apply(
        m.starts, m.ends, m.edge_ids, m.midpoints, m.lengths, m.edge_ids,
        _force_mid(m, sing), mid_ptr, mid_pts, mid_w, far_ptr, far_pts, far_w, skip_ptr, skip_idx,
    )
    for k, j in pairs:
        t, w = _graded_pair_rule(m, j, k, sing)
        x = m.starts[j] + t[:, None] * (m.ends[j] - m.starts[j])
        wj = w * m.lengths[j] * fl(x, np.broadcast_to(normals[j], x.shape))
        a0, a1 = _hypsing_nodes_sum(m.starts[k], m.ends[k], x, wj)
        r0[k] += a0 - a1
        r1[k] += a1
    dl = r0 + np.roll(r1, 1)
    values = 0.5 * mass + INV_2PI * dl
    return CoefficientVector(values, "P1", m)


def dump_matrix(A, path) -> None:
    """Write a matrix row-major, one row per line, ``%.17g`` entries."""
    np.savetxt(Path(path), np.asarray(A), fmt="%.17g")
