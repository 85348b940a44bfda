"""Manufactured harmonic functions ``u = r^alpha cos(alpha (theta - theta0))``.

``r`` and ``theta`` are polar coordinates about ``center``. The angle
``theta - theta0`` is taken in ``(-pi, pi]`` so the branch cut is the ray
``theta = theta0 + pi``; the domain must stay clear of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polygon

__all__ = ["SolutionError", "SingularSolution", "solution_for", "eval_trace", "eval_flux"]


class SolutionError(ValueError):
    pass


@dataclass(frozen=True)
class SingularSolution:
    alpha: float
    theta0: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise SolutionError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def _polar(self, x):
        x = np.asarray(x, dtype=float)
        dx = x[..., 0] - self.center[0]
        dy = x[..., 1] - self.center[1]
        c, s = math.cos(self.theta0), math.sin(self.theta0)
        # rotate into the frame where theta0 is the reference axis
        xr = c * dx + s * dy
        yr = -s * dx + c * dy
        return np.hypot(xr, yr), np.arctan2(yr, xr)

    def trace(self, x) -> np.ndarray:
        """``u(x)``; vectorized over leading axes of ``x``."""
        r, psi = self._polar(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(r > 0, r**self.alpha * np.cos(self.alpha * psi), 0.0)
        return val

    def gradient(self, x) -> np.ndarray:
        """Cartesian gradient of ``u``; singular at the center when ``alpha < 1``."""
        r, psi = self._polar(x)
        a = self.alpha
        if np.any(r == 0):
            raise SolutionError("gradient evaluated at the singular point")
        # u_x - i u_y = a * exp(-i theta0) * w^(a-1), w = r exp(i psi)
        mag = a * r ** (a - 1.0)
        phase = (a - 1.0) * psi - self.theta0
        return np.stack([mag * np.cos(phase), -mag * np.sin(phase)], axis=-1)

    def flux(self, x, n) -> np.ndarray:
        """Normal derivative ``grad u . n``."""
        g = self.gradient(x)
        n = np.asarray(n, dtype=float)
        return g[..., 0] * n[..., 0] + g[..., 1] * n[..., 1]

    def check_branch(self, points) -> None:
        """Raise unless every point avoids the branch cut."""
        r, psi = self._polar(points)
        bad = (r > 0) & (np.abs(psi) >= math.pi - 1e-12)
        if np.any(bad):
            raise SolutionError("branch cut of the manufactured solution meets the boundary")


def solution_for(p: Polygon, alpha: float) -> SingularSolution:
    """Solution singular at the polygon's largest-angle vertex, ``theta0`` on its bisector."""
    j = p.singular_vertex
    theta0 = math.remainder(p.bisector_angle(j), 2.0 * math.pi)
    if abs(theta0) < 1e-14:
        theta0 = 0.0
    sol = SingularSolution(alpha, theta0, tuple(p.vertices[j]))
    sol.check_branch(p.vertices)
    return sol


def eval_trace(s: SingularSolution, x) -> float:
    x = np.asarray(x, dtype=float)
    if s.alpha <= 0 and np.allclose(x, s.center):
        raise SolutionError("trace undefined at the center")
    return float(s.trace(x))


def eval_flux(s: SingularSolution, x, n) -> float:
    return float(s.flux(np.asarray(x, dtype=float), np.asarray(n, dtype=float)))
