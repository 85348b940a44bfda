"""Polygonal boundaries, quasi-uniform boundary meshes and local regions.

A :class:`Polygon` is a simple counter-clockwise polygon. A
:class:`BoundaryMesh` splits each polygon edge into straight elements;
element ``i`` runs from ``nodes[i]`` to ``nodes[(i + 1) % N]``. Uniform
refinement bisects every element so that element ``i`` at level ``l``
has the children ``2i`` and ``2i + 1`` at level ``l + 1``. The ancestor
of element ``i`` at a coarser level ``b`` is therefore ``i >> (l - b)``,
which is how a :class:`BoundaryRegion` follows its elements through
refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "GeometryError",
    "Polygon",
    "BoundaryMesh",
    "BoundaryRegion",
    "canonical_geometry",
    "alpha_D_bound",
    "initial_mesh",
    "refine_uniform",
    "select_region",
    "distance_selector",
    "read_polygon",
    "CANONICAL_NAMES",
]

CANONICAL_NAMES = ("lshape", "zshape", "square")

# relative tolerance used for geometric predicates (angle == pi, diameter bound)
_GEOM_RTOL = 1e-12


class GeometryError(ValueError):
    """Raised when a polygon, mesh or region violates its invariants."""


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test (touching counts)."""

    def orient(a, b, c):
        val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        scale = max(abs(b[0] - a[0]) + abs(b[1] - a[1]), abs(c[0] - a[0]) + abs(c[1] - a[1]), 1e-300)
        if abs(val) <= 1e-14 * scale * scale:
            return 0
        return 1 if val > 0 else -1

    def on_segment(a, b, c):
        return min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15 and min(a[1], b[1]) - 1e-15 <= c[1] <= max(
            a[1], b[1]
        ) + 1e-15

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple closed polygon with counter-clockwise vertices.

    Construction validates the polygon and raises :class:`GeometryError`
    naming the violated condition. The diameter bound needed by the
    single-layer operator is *not* enforced here; see :meth:`normalized`.
    """

    vertices: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError(f"vertices must have shape (J, 2), got {v.shape}")
        if v.shape[0] < 3:
            raise GeometryError(f"a polygon needs at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertex coordinates must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        scale = float(np.max(np.ptp(v, axis=0)))
        if np.any(lengths <= _GEOM_RTOL * scale):
            j = int(np.argmin(lengths))
            raise GeometryError(f"consecutive vertices {j} and {(j + 1) % len(v)} coincide")
        if self.signed_area <= 0.0:
            raise GeometryError("vertices are not in counter-clockwise order (signed area <= 0)")
        angles = self.interior_angles
        straight = np.abs(angles - math.pi) <= 1e-10
        if np.any(straight):
            raise GeometryError(f"interior angle equals pi at vertex {int(np.argmax(straight))}")
        J = len(v)
        for i in range(J):
            for k in range(i + 1, J):
                if k == i + 1 or (i == 0 and k == J - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % J], v[k], v[(k + 1) % J]):
                    raise GeometryError(f"polygon is not simple: edges {i} and {k} intersect")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.edge_vectors
        return np.hypot(e[:, 0], e[:, 1])

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.edge_lengths))

    @property
    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(_cross(v, w)))

    @property
    def diameter(self) -> float:
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))

    @property
    def interior_angles(self) -> np.ndarray:
        """Interior angle at every vertex, in (0, 2*pi)."""
        v = self.vertices
        to_next = np.roll(v, -1, axis=0) - v
        to_prev = np.roll(v, 1, axis=0) - v
        ang = np.arctan2(_cross(to_next, to_prev), np.sum(to_next * to_prev, axis=1))
        return np.mod(ang, 2.0 * math.pi)

    @property
    def singular_vertex(self) -> int:
        """Index of the vertex with the largest interior angle."""
        return int(np.argmax(self.interior_angles))

    def bisector_angle(self, j: int) -> float:
        """Polar angle of the interior-angle bisector at vertex ``j``."""
        v = self.vertices
        d = v[(j + 1) % len(v)] - v[j]
        start = math.atan2(d[1], d[0])
        return start + 0.5 * float(self.interior_angles[j])

    def scaled(self, factor: float) -> "Polygon":
        return Polygon(self.vertices * factor, self.name)

    def normalized(self, diameter: float = 0.5) -> "Polygon":
        """Uniformly rescaled copy (about the origin) with the given diameter."""
        return self.scaled(diameter / self.diameter)


def _rotate(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T


def canonical_geometry(name: str) -> Polygon:
    """The L-shape, Z-shape or square used by the convergence experiments.

    Each polygon has its singular corner at the origin, the bisector of
    that corner's interior angle on the positive x-axis, and diameter 1/2.

    * ``lshape``: ``(-1, 1)^2`` minus the quadrant ``[0, 1] x [-1, 0]``,
      rotated by ``-3*pi/4``; reentrant angle ``3*pi/2``.
    * ``zshape``: ``(-1, 1)^2`` minus the triangle ``(0,0), (-1,-1), (0,-1)``,
      rotated by ``-3*pi/8``; reentrant angle ``7*pi/4``.
    * ``square``: the square with corners ``(0,0), (1/4,-1/4), (1/2,0), (1/4,1/4)``.
    """
    scale = 1.0 / (4.0 * math.sqrt(2.0))
    if name == "lshape":
        raw = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [0.0, -1.0]])
        verts = _rotate(raw, -0.75 * math.pi) * scale
    elif name == "zshape":
        raw = np.array([[0.0, 0.0], [0.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]])
        verts = _rotate(raw, -0.375 * math.pi) * scale
    elif name == "square":
        verts = np.array([[0.0, 0.0], [0.25, -0.25], [0.5, 0.0], [0.25, 0.25]])
    else:
        raise GeometryError(f"unknown geometry {name!r}; expected one of {CANONICAL_NAMES}")
    verts[0] = 0.0  # exact singular corner
    return Polygon(verts, name)


def alpha_D_bound(p: Polygon) -> float:
    """Supremum of the admissible shift parameter for the polygon.

    ``min_j min(pi/w_j, pi/(2*pi - w_j)) - 1/2`` over the interior angles ``w_j``.
    """
    w = p.interior_angles
    if np.any(np.abs(w - math.pi) <= 1e-10):
        raise GeometryError("interior angle equals pi")
    s = np.minimum(math.pi / w, math.pi / (2.0 * math.pi - w))
    return float(np.min(s)) - 0.5


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Partition of the polygon boundary into straight elements.

    Element ``i`` is the segment ``nodes[i] -> nodes[(i + 1) % N]`` lying on
    polygon edge ``edge_ids[i]``. Nodes double as the degrees of freedom of
    the continuous piecewise-linear space.
    """

    polygon: Polygon
    nodes: np.ndarray
    edge_ids: np.ndarray
    level: int = 0

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        edge_ids = np.array(self.edge_ids, dtype=np.int64)
        nodes.setflags(write=False)
        edge_ids.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edge_ids", edge_ids)

    @property
    def n_elements(self) -> int:
        return len(self.nodes)

    @property
    def starts(self) -> np.ndarray:
        return self.nodes

    @property
    def ends(self) -> np.ndarray:
        return np.roll(self.nodes, -1, axis=0)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def lengths(self) -> np.ndarray:
        d = self.ends - self.starts
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def tangents(self) -> np.ndarray:
        d = self.ends - self.starts
        return d / np.hypot(d[:, 0], d[:, 1])[:, None]

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normals (tangent rotated clockwise for CCW boundaries)."""
        t = self.tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    @property
    def h(self) -> float:
        return float(np.max(self.lengths))

    @property
    def quasi_uniformity(self) -> float:
        ell = self.lengths
        return float(np.max(ell) / np.min(ell))

    def element_points(self, t: np.ndarray) -> np.ndarray:
        """Points at local parameters ``t`` in [0, 1]; shape ``(N, len(t), 2)``."""
        t = np.asarray(t, dtype=float)
        return self.starts[:, None, :] + t[None, :, None] * (self.ends - self.starts)[:, None, :]

    def corner_nodes(self) -> np.ndarray:
        """Node index of every polygon vertex."""
        first = np.flatnonzero(np.diff(np.concatenate([[self.edge_ids[-1]], self.edge_ids])) != 0)
        if len(first) == 0:
            first = np.array([0])
        return first

    def ancestors(self, level: int) -> np.ndarray:
        """Index of every element's ancestor at a coarser ``level``."""
        if level > self.level:
            raise GeometryError(f"level {level} is finer than mesh level {self.level}")
        return np.arange(self.n_elements) >> (self.level - level)


def initial_mesh(
    p: Polygon,
    target_h: float | None = None,
    elements_per_edge: int | None = None,
) -> BoundaryMesh:
    """Split each polygon edge into equal elements.

    Exactly one of ``target_h`` (upper bound on element length) and
    ``elements_per_edge`` must be given. With ``target_h`` the bound is
    lowered to twice the shortest edge if necessary, so the ratio of the
    longest to the shortest element never exceeds 2.
    """
    if (target_h is None) == (elements_per_edge is None):
        raise GeometryError("give exactly one of target_h and elements_per_edge")
    lengths = p.edge_lengths
    if target_h is not None:
        if not target_h > 0:
            raise GeometryError(f"target_h must be positive, got {target_h}")
        h = min(float(target_h), 2.0 * float(np.min(lengths)))
        counts = np.maximum(1, np.ceil(lengths / h - 1e-9).astype(int))
    else:
        if elements_per_edge < 1:
            raise GeometryError("elements_per_edge must be >= 1")
        counts = np.full(p.n_vertices, int(elements_per_edge))
    v = p.vertices
    nodes, edge_ids = [], []
    for j, n in enumerate(counts):
        a, b = v[j], v[(j + 1) % p.n_vertices]
        t = np.arange(n) / n
        pts = a[None, :] + t[:, None] * (b - a)[None, :]
        pts[0] = a
        nodes.append(pts)
        edge_ids.append(np.full(n, j))
    return BoundaryMesh(p, np.vstack(nodes), np.concatenate(edge_ids), level=0)


def refine_uniform(m: BoundaryMesh) -> BoundaryMesh:
    """Bisect every element at its midpoint."""
    n = m.n_elements
    nodes = np.empty((2 * n, 2))
    nodes[0::2] = m.starts
    nodes[1::2] = m.midpoints
    return BoundaryMesh(m.polygon, nodes, np.repeat(m.edge_ids, 2), level=m.level + 1)


@dataclass(frozen=True, eq=False)
class BoundaryRegion:
    """A union of whole elements, recorded at the level where it was selected."""

    level: int
    members: np.ndarray
    n_base: int = field(default=0)

    def __post_init__(self):
        members = np.unique(np.asarray(self.members, dtype=np.int64))
        if len(members) == 0:
            raise GeometryError("region is empty")
        members.setflags(write=False)
        object.__setattr__(self, "members", members)

    def mask(self, m: BoundaryMesh) -> np.ndarray:
        """Boolean membership of every element of ``m`` (a refinement of the base mesh)."""
        if self.n_base and m.n_elements != self.n_base << (m.level - self.level):
            raise GeometryError("mesh is not a uniform refinement of the region's base mesh")
        anc = m.ancestors(self.level)
        out = np.zeros(m.n_elements, dtype=bool)
        out[np.isin(anc, self.members)] = True
        return out

    def elements(self, m: BoundaryMesh) -> np.ndarray:
        return np.flatnonzero(self.mask(m))

    def arc_length(self, m: BoundaryMesh) -> float:
        return float(np.sum(m.lengths[self.mask(m)]))

    def touches(self, m: BoundaryMesh, point) -> bool:
        """Whether any member element has ``point`` as an endpoint."""
        idx = self.elements(m)
        point = np.asarray(point, dtype=float)
        for pts in (m.starts[idx], m.ends[idx]):
            if np.any(np.all(np.abs(pts - point) <= 1e-14, axis=1)):
                return True
        return False


Selector = Union[Callable[[np.ndarray], np.ndarray], Sequence[int]]


def select_region(m: BoundaryMesh, selector: Selector) -> BoundaryRegion:
    """Region of the elements of ``m`` picked by ``selector``.

    ``selector`` is either a callable mapping the ``(N, 2)`` midpoint array to
    a boolean mask, or an explicit collection of polygon edge ids.
    """
    if callable(selector):
        mask = np.asarray(selector(m.midpoints), dtype=bool)
        if mask.shape != (m.n_elements,):
            raise GeometryError("selector must return one boolean per element")
    else:
        mask = np.isin(m.edge_ids, np.asarray(list(selector), dtype=np.int64))
    members = np.flatnonzero(mask)
    if len(members) == 0:
        raise GeometryError("selector matched no elements")
    return BoundaryRegion(m.level, members, m.n_elements)


def distance_selector(p: Polygon, fraction: float = 0.3, center=None) -> Callable[[np.ndarray], np.ndarray]:
    """Midpoints at distance ``>= fraction * diam`` from ``center``.

    ``center`` defaults to the polygon's singular vertex.
    """
    if center is None:
        center = p.vertices[p.singular_vertex]
    center = np.asarray(center, dtype=float)
    radius = fraction * p.diameter

    def select(midpoints: np.ndarray) -> np.ndarray:
        d = midpoints - center
        return np.hypot(d[:, 0], d[:, 1]) >= radius

    return select


def read_polygon(path, normalize: bool = False) -> Polygon:
    """Read ``x y`` vertex pairs, one per line; ``#`` starts a comment.

    The polygon must satisfy every :class:`Polygon` invariant and have
    diameter < 1. With ``normalize=True`` it is instead rescaled to
    diameter 1/2.
    """
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GeometryError(f"{path}:{lineno}: expected 'x y', got {raw!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise GeometryError(f"{path}:{lineno}: {exc}") from None
    poly = Polygon(np.array(rows, dtype=float).reshape(-1, 2), Path(path).stem)
    if normalize:
        return poly.normalized()
    if poly.diameter >= 1.0:
        raise GeometryError(f"polygon diameter {poly.diameter:.6g} >= 1 (single-layer ellipticity requires < 1)")
    return poly
