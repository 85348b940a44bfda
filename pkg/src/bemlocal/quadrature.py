"""Laplace kernels in 2D, closed-form panel integrals and quadrature rules.

The fundamental solution is ``G(x, y) = -log|x - y| / (2*pi)``. Panel
integrals are written in local coordinates of a straight panel from ``a``
to ``b``: with unit tangent ``tau`` and normal ``nu`` (``tau`` rotated
clockwise) a point ``y`` on the panel relative to an observation point
``p`` is ``y - p = u*tau + d*nu`` with ``u`` running over
``[s0, s0 + L]``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "QuadratureError",
    "GaussRule",
    "gauss_rule",
    "jacobi_rule",
    "green_log",
    "panel_log_moment",
    "panel_dlp_kernel",
    "panel_dlp_moments",
    "adaptive_quad",
    "graded_rule",
]

INV_2PI = 1.0 / (2.0 * math.pi)


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class GaussRule:
    """Gauss-Legendre rule on the reference interval [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def on_unit(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights mapped to [0, 1]."""
        return 0.5 * (self.nodes + 1.0), 0.5 * self.weights


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> GaussRule:
    if n < 1:
        raise ValueError("Gauss rule order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussRule(n, x, w)


@lru_cache(maxsize=None)
def jacobi_rule(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for integrals of ``t**beta * f(t)`` (weights include ``t**beta``)."""
    x, w = roots_jacobi(n, 0.0, beta)
    t = 0.5 * (x + 1.0)
    w = w * 0.5 ** (beta + 1.0)
    return t, w


def green_log(x, y) -> float:
    """Laplace fundamental solution ``-log|x - y| / (2*pi)``."""
    r = math.hypot(x[0] - y[0], x[1] - y[1])
    if r == 0.0:
        raise QuadratureError("green_log is singular at x == y")
    return -INV_2PI * math.log(r)


def _local_coords(a, b, p):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    e = b - a
    L = np.hypot(e[..., 0], e[..., 1])
    tau = e / L[..., None]
    nu = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
    rel = a - p
    s0 = np.sum(rel * tau, axis=-1)
    d = np.sum(rel * nu, axis=-1)
    return L, tau, nu, s0, d


def _xlogx2(u, d2):
    """``u * log(u**2 + d2)`` with the removable zero handled."""
    r2 = u * u + d2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = u * np.log(r2)
    return np.where(r2 > 0.0, out, 0.0)


def panel_log_moment(a, b, x):
    """``integral over [a, b] of log|x - y| ds_y`` in closed form.

    Broadcasts over leading dimensions; valid for ``x`` anywhere,
    including on the panel.
    """
    L, _, _, s0, d = _local_coords(a, b, x)
    s1 = s0 + L
    val = 0.5 * (_xlogx2(s1, d * d) - _xlogx2(s0, d * d)) - L
    val = val + d * np.arctan2(d * L, d * d + s0 * s1)
    return val if np.ndim(val) else float(val)


def panel_dlp_kernel(y, normal_y, x) -> float:
    """Double-layer kernel ``dG/dn_y = ((x - y).n_y) / (2*pi*|x - y|^2)``."""
    dx, dy = x[0] - y[0], x[1] - y[1]
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        raise QuadratureError("double-layer kernel is singular at x == y")
    return INV_2PI * (dx * normal_y[0] + dy * normal_y[1]) / r2


def panel_dlp_moments(a, b, p):
    """Vector moments ``int (y - p)/|y - p|^2 * {1, t} ds_y`` over the panel.

    ``t`` in [0, 1] is the local panel parameter. Returns ``(m0, m1)``, each
    with a trailing axis of length 2. The tangential parts diverge
    logarithmically when ``p`` is a panel endpoint.
    """
    L, tau, nu, s0, d = _local_coords(a, b, p)
    s1 = s0 + L
    with np.errstate(divide="ignore"):
        log_part = 0.5 * np.log((s1 * s1 + d * d) / (s0 * s0 + d * d))
    ang = np.arctan2(d * L, d * d + s0 * s1)
    m0 = log_part[..., None] * tau + ang[..., None] * nu
    t_tau = (L - d * ang - s0 * log_part) / L
    t_nu = (d * log_part - s0 * ang) / L
    m1 = t_tau[..., None] * tau + t_nu[..., None] * nu
    return m0, m1


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-12,
    points=(),
    max_subintervals: int = 2**16,
    order: int = 10,
) -> float:
    """Globally adaptive bisection with a Gauss-Legendre rule per interval.

    ``f`` must accept an array of abscissae. The error on each interval is
    estimated by comparing the rule on the whole interval against the sum
    over its two halves; the interval with the largest estimate is split
    until the summed estimate drops below ``tol``. ``points`` are interior
    breakpoints (for example known singularities).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x, w = gauss_rule(order).nodes, gauss_rule(order).weights

    def rule(lo, hi):
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return r * float(np.dot(w, f(c + r * x)))

    def evaluate(lo, hi):
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        fine = left + right
        err = abs(fine - rule(lo, hi))
        if not (math.isfinite(fine) and math.isfinite(err)):
            raise QuadratureError(f"adaptive_quad: non-finite integrand on [{lo!r}, {hi!r}]")
        return fine, err

    edges = sorted({float(a), float(b), *[float(p) for p in points if a < p < b]})
    heap = []
    total = err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = evaluate(lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))
        total += val
        err_total += err
    count = len(heap)
    while err_total > tol:
        if count >= max_subintervals:
            raise QuadratureError(f"adaptive_quad did not converge within {max_subintervals} subintervals")
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError("adaptive_quad: interval underflow near a non-integrable point")
        total -= val
        err_total += neg_err
        for sub in ((lo, mid), (mid, hi)):
            v, e = evaluate(*sub)
            heapq.heappush(heap, (-e, sub[0], sub[1], v))
            total += v
            err_total += e
        count += 1
    # re-sum to avoid drift from the running updates
    return math.fsum(item[3] for item in heap)


def graded_rule(
    dist: Callable[[float, float], float],
    n: int = 8,
    ratio: float = 1.0,
    max_depth: int = 40,
    singular_end: int | None = None,
    singular_exponent: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on [0, 1] refined toward nearby singularities.

    An interval ``[s, t]`` is bisected while ``t - s > ratio * dist(s, t)``,
    where ``dist`` returns a (scaled) distance from the interval to the
    nearest singularity. Leaves at maximal depth get the same Gauss rule,
    except that a leaf touching ``singular_end`` (0 or 1) uses a Gauss-Jacobi
    rule for the weight ``|t - singular_end|**singular_exponent``; then the
    returned weights are for ``f(t) / |t - end|**exponent`` *not* included,
    i.e. they integrate ``f`` directly as long as ``f`` behaves like that
    power near the end.
    """
    gx, gw = gauss_rule(n).on_unit()
    nodes, weights = [], []
    stack = [(0.0, 1.0, 0)]
    while stack:
        s, t, depth = stack.pop()
        length = t - s
        touches_end = singular_end is not None and ((singular_end == 0 and s == 0.0) or (singular_end == 1 and t == 1.0))
        if depth < max_depth and length > ratio * dist(s, t):
            mid = 0.5 * (s + t)
            stack.append((s, mid, depth + 1))
            stack.append((mid, t, depth + 1))
            continue
        if touches_end and singular_exponent is not None and singular_exponent != 0.0:
            jt, jw = jacobi_rule(n, float(singular_exponent))
            # weight includes r**beta; divide it back out so the rule applies to f itself
            if singular_end == 0:
                loc = s + length * jt
                r = loc - 0.0
            else:
                loc = t - length * jt
                r = 1.0 - loc
            nodes.append(loc)
            weights.append(length * jw * length**singular_exponent / r**singular_exponent)
        else:
            nodes.append(s + length * gx)
            weights.append(length * gw)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    order = np.argsort(x)
    return x[order], w[order]


def log_moment_oracle(a, b, x, tol: float = 1e-12) -> float:
    """``int_{[a,b]} log|x - y| ds_y`` by adaptive quadrature (validation only).

    When ``x`` projects into the panel the integral is split there and each
    half is mapped by ``t = t* +- u^2``, which removes the logarithmic
    singularity for on-panel points.
    """
    a, b, x = (np.asarray(v, dtype=float) for v in (a, b, x))
    d = b - a
    L = float(np.hypot(*d))
    ts = float(np.dot(x - a, d) / L**2)
    if not 0.0 < ts < 1.0:

        def f(t):
            y = a[None, :] + t[:, None] * d[None, :]
            return 0.5 * np.log(np.sum((x[None, :] - y) ** 2, axis=1))

        return L * adaptive_quad(f, 0.0, 1.0, tol)
    perp2 = float(np.sum((a + ts * d - x) ** 2))

    def mapped(u):
        # |x - y|^2 = (u^2 L)^2 + perp^2 for y at parameter ts +- u^2
        if perp2 == 0.0:
            return u * (4.0 * np.log(u) + 2.0 * math.log(L))
        return u * np.log((u * u * L) ** 2 + perp2)

    return L * (adaptive_quad(mapped, 0.0, math.sqrt(ts), tol) + adaptive_quad(mapped, 0.0, math.sqrt(1.0 - ts), tol))


def slp_pair_oracle(a, b, c, d, tol: float = 1e-12) -> float:
    """``int_{[a,b]} int_{[c,d]} log|x - y| ds_y ds_x`` by nested adaptive quadrature.

    Independent of the closed forms; for validation only. The inner
    integral is :func:`log_moment_oracle`; the outer one gets breakpoints
    where ``c`` and ``d`` project onto ``[a, b]``.
    """
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    La = float(np.hypot(*(b - a)))

    def outer(s):
        return np.array([log_moment_oracle(c, d, a + si * (b - a), tol) for si in s])

    breaks = [float(np.dot(p - a, b - a) / La**2) for p in (c, d)]
    return La * adaptive_quad(outer, 0.0, 1.0, tol, [x for x in breaks if 0.0 < x < 1.0])
