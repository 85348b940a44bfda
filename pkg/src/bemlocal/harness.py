"""Convergence experiments: configuration, per-level records, rate checks and output.

A run starts from ``elements_per_edge`` elements on every polygon edge
(level 0) and records levels ``1..levels``, each a uniform bisection of
the previous mesh. Local norms are measured on a region selected once on
the level-0 mesh, so it is the same point set at every level.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import backend
from .geometry import (
    CANONICAL_NAMES,
    GeometryError,
    Polygon,
    alpha_D_bound,
    canonical_geometry,
    distance_selector,
    initial_mesh,
    read_polygon,
    refine_uniform,
    select_region,
)
from .norms import (
    ErrorRecord,
    energy_error_global,
    fit_eoc,
    flux_error,
    h1_seminorm_error_local,
    l2_error,
    neg_half_norm_local,
    pairwise_eoc,
    tangential_error,
)
from .solutions import solution_for
from .solver import galerkin_solve_hypsing, galerkin_solve_symm

__all__ = [
    "ConfigError",
    "ExperimentError",
    "ExperimentConfig",
    "ConvergenceTable",
    "load_geometry",
    "predicted_rates",
    "run_experiment",
    "emit_csv",
    "emit_plot_data",
    "read_config_file",
]

log = logging.getLogger(__name__)

EQUATIONS = ("symm", "hypsing")
# local best-approximation order of the lowest-order spaces away from the corner
BETA = 1.0
DEFAULT_TOLERANCE = {"lshape": 0.10, "zshape": 0.08}
ENERGY_TOLERANCE = 0.08


class ConfigError(ValueError):
    """Invalid experiment input (CLI exit code 2)."""


class ExperimentError(RuntimeError):
    """A numerical stage failed (CLI exit code 3)."""

    def __init__(self, level: int, stage: str, cause: BaseException):
        super().__init__(f"level {level}, stage {stage!r}: {cause}")
        self.level = level
        self.stage = stage
        self.cause = cause


def parse_alpha(text) -> float:
    """Accept ``1/3``, ``0.125`` or a number."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse alpha {text!r}") from None


@dataclass
class ExperimentConfig:
    """Inputs of one convergence run.

    ``geometry`` is a canonical name or ``file:PATH`` (vertex file, rescaled
    to diameter 1/2). ``rate_overrides`` replaces predicted rates by norm
    name; ``tolerance`` defaults to 0.10 (0.08 on the Z-shape) for the local
    rate and to 0.08 for the global energy rate.
    """

    geometry: str = "lshape"
    equation: str = "symm"
    alpha: float = 1.0 / 3.0
    levels: int = 7
    elements_per_edge: int = 6
    region_dist: float = 0.3
    hm12_refine: int = 4
    energy_refine: int = 2
    eoc_window: int = 4
    csv: str | None = None
    plot: str | None = None
    threads: int | None = None
    rate_overrides: dict[str, float] = field(default_factory=dict)
    tolerance: float | None = None
    energy_tolerance: float = ENERGY_TOLERANCE
    report_global_l2: bool = False

    def validate(self) -> None:
        if self.equation not in EQUATIONS:
            raise ConfigError(f"equation must be one of {EQUATIONS}, got {self.equation!r}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.levels < 3:
            raise ConfigError(f"levels must be >= 3, got {self.levels}")
        if self.elements_per_edge < 1:
            raise ConfigError("elements_per_edge must be >= 1")
        if not 0 < self.region_dist < 1:
            raise ConfigError(f"region distance fraction must lie in (0, 1), got {self.region_dist}")
        if self.hm12_refine < 2 or self.energy_refine < 1:
            raise ConfigError("projection refine factors must be >= 2 (local) and >= 1 (global)")
        if not 2 <= self.eoc_window <= self.levels:
            raise ConfigError(f"eoc window must lie in [2, levels], got {self.eoc_window}")
        if self.report_global_l2 and (self.equation != "symm" or self.alpha <= 0.5):
            raise ConfigError("global L2 errors need the symm equation and alpha > 1/2 (flux not in L2 otherwise)")
        if self.geometry not in CANONICAL_NAMES and not self.geometry.startswith("file:"):
            raise ConfigError(f"geometry must be one of {CANONICAL_NAMES} or file:PATH, got {self.geometry!r}")

    @property
    def local_name(self) -> str:
        return "l2_local" if self.equation == "symm" else "h1_local"

    @property
    def geometry_key(self) -> str:
        return self.geometry if self.geometry in CANONICAL_NAMES else "custom"

    def local_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return DEFAULT_TOLERANCE.get(self.geometry_key, 0.10)


def load_geometry(name: str) -> Polygon:
    if name in CANONICAL_NAMES:
        return canonical_geometry(name)
    if name.startswith("file:"):
        try:
            return read_polygon(name[5:], normalize=True)
        except OSError as exc:
            raise ConfigError(f"cannot read polygon file: {exc}") from None
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown geometry {name!r}")


def predicted_rates(geometry: str | Polygon, alpha: float, equation: str = "symm") -> dict[str, float]:
    """Asymptotic rates in powers of ``N^-1``.

    ``energy_global`` is ``alpha``; the local rate (``l2_local`` for
    ``symm``, ``h1_local`` for ``hypsing``) is
    ``min(1/2 + alpha + alpha_D, 1)``. ``hm12_local`` shares the local
    rate for ``symm``.
    """
    if equation not in EQUATIONS:
        raise ConfigError(f"equation must be one of {EQUATIONS}, got {equation!r}")
    poly = load_geometry(geometry) if isinstance(geometry, str) else geometry
    local = min(0.5 + alpha + alpha_D_bound(poly), BETA)
    if equation == "symm":
        return {"energy_global": alpha, "l2_local": local, "hm12_local": local}
    return {"energy_global": alpha, "h1_local": local}


@dataclass
class ConvergenceTable:
    config: ExperimentConfig
    records: list[ErrorRecord] = field(default_factory=list)
    predicted: dict[str, float] = field(default_factory=dict)
    eoc: dict[str, float] = field(default_factory=dict)
    tolerance: dict[str, float] = field(default_factory=dict)
    passed: dict[str, bool] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def norm_names(self) -> list[str]:
        names = ["energy_global", self.config.local_name, "hm12_local"]
        if self.config.report_global_l2:
            names.append("l2_global")
        return names

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def summary(self) -> str:
        lines = []
        for name in self.norm_names:
            if name not in self.eoc:
                continue
            line = f"{name:14s} eoc={self.eoc[name]:.4f}"
            if name in self.passed:
                verdict = "pass" if self.passed[name] else "FAIL"
                line += f" predicted={self.predicted[name]:.4f} tol={self.tolerance[name]:.2f} {verdict}"
            lines.append(line)
        return "\n".join(lines)


def _measure(cfg, m, sol, region, stage):
    norms = {}
    if cfg.equation == "symm":
        stage[0] = "solve"
        s = galerkin_solve_symm(m, sol)
        phi = s.values
        stage[0] = "energy norm"
        norms["energy_global"] = energy_error_global(m, phi, sol, cfg.energy_refine)
        stage[0] = "local L2 norm"
        norms["l2_local"] = l2_error(m, phi, sol, region)
        stage[0] = "local H^-1/2 norm"
        norms["hm12_local"] = neg_half_norm_local(flux_error(m, phi, sol), region, cfg.hm12_refine)
        if cfg.report_global_l2:
            stage[0] = "global L2 norm"
            norms["l2_global"] = l2_error(m, phi, sol, None)
    else:
        stage[0] = "solve"
        s = galerkin_solve_hypsing(m, sol)
        u = s.values
        de = tangential_error(m, u, sol)
        stage[0] = "energy norm"
        # <W e, e> = <V e', e'> with e' the arc-length derivative of the error
        norms["energy_global"] = neg_half_norm_local(de, None, cfg.energy_refine, "accurate")
        stage[0] = "local H1 norm"
        norms["h1_local"] = h1_seminorm_error_local(m, u, sol, region)
        stage[0] = "local H^-1/2 norm"
        norms["hm12_local"] = neg_half_norm_local(de, region, cfg.hm12_refine)
    for name, v in norms.items():
        if not math.isfinite(v):
            raise ArithmeticError(f"{name} is not finite")
    return norms


def _setup(cfg: ExperimentConfig):
    poly = load_geometry(cfg.geometry)
    sol = solution_for(poly, cfg.alpha)
    mesh0 = initial_mesh(poly, elements_per_edge=cfg.elements_per_edge)
    try:
        region = select_region(mesh0, distance_selector(poly, cfg.region_dist))
    except GeometryError as exc:
        raise ConfigError(f"region selection: {exc}") from None
    if region.touches(mesh0, sol.center):
        raise ConfigError("the local region touches the singular corner")
    return poly, sol, mesh0, region


def run_experiment(
    c: ExperimentConfig,
    progress: Callable[[ErrorRecord], None] | None = None,
) -> ConvergenceTable:
    """Solve on every level, measure errors, then fit and check rates.

    Raises
    ------
    ConfigError
        Invalid configuration.
    ExperimentError
        A stage failed; carries the level and stage name.
    """
    c.validate()
    if c.threads is not None:
        backend.set_threads(c.threads)
    poly, sol, m, region = _setup(c)
    table = ConvergenceTable(c)
    t0 = time.perf_counter()
    for level in range(1, c.levels + 1):
        stage = ["refine"]
        try:
            m = refine_uniform(m)
            norms = _measure(c, m, sol, region, stage)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise ExperimentError(level, stage[0], exc) from exc
        rec = ErrorRecord(level, m.n_elements, m.h, norms)
        table.records.append(rec)
        log.info("level %d N=%d %s", level, m.n_elements, norms)
        if progress is not None:
            progress(rec)
    table.seconds = time.perf_counter() - t0
    _fit(table)
    return table


def _fit(table: ConvergenceTable) -> None:
    c = table.config
    predicted = predicted_rates(load_geometry(c.geometry), c.alpha, c.equation)
    predicted.update(c.rate_overrides)
    for name in table.norm_names:
        table.eoc[name] = fit_eoc(table.records, name, c.eoc_window)
    for name, rate in predicted.items():
        if name not in table.eoc:
            continue
        tol = c.energy_tolerance if name == "energy_global" else c.local_tolerance()
        table.predicted[name] = rate
        table.tolerance[name] = tol
        table.passed[name] = abs(table.eoc[name] - rate) <= tol


def _csv_columns(table: ConvergenceTable) -> list[tuple[str, str]]:
    loc = "l2_local" if table.config.equation == "symm" else "h1_local"
    cols = [
        ("err_energy_global", "energy_global"),
        (f"err_{loc}", loc),
        ("err_hm12_local", "hm12_local"),
    ]
    if table.config.report_global_l2:
        cols.append(("err_l2_global", "l2_global"))
    return cols


def emit_csv(t: ConvergenceTable, path) -> None:
    """Write one row per level; EOCs are between consecutive levels."""
    if not t.records:
        raise ValueError("convergence table is empty")
    loc = t.config.local_name
    errs = _csv_columns(t)
    header = ["level", "N", "h"] + [c for c, _ in errs[:3]]
    header += ["eoc_energy", f"eoc_{loc}", "eoc_hm12_local", f"predicted_{loc}"]
    if t.config.report_global_l2:
        header.insert(6, "err_l2_global")
    rates = {name: pairwise_eoc(t.records, name) for _, name in errs}
    pred = t.predicted.get(loc)
    if pred is None:
        pred = predicted_rates(load_geometry(t.config.geometry), t.config.alpha, t.config.equation)[loc]
    lines = [",".join(header)]
    for i, rec in enumerate(t.records):
        row = [str(rec.level), str(rec.N), f"{rec.h:.10e}"]
        row += [f"{rec.norms[name]:.10e}" for _, name in errs]
        for name in ("energy_global", loc, "hm12_local"):
            r = rates[name][i]
            row.append("" if r is None else f"{r:.10e}")
        row.append(f"{pred:.10e}")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def emit_plot_data(t: ConvergenceTable, path) -> None:
    """Columns ``N``, every norm, and ``C N^-rate`` per predicted rate.

    Each reference curve passes through the measured value at the final
    ``N``.
    """
    if not t.records:
        raise ValueError("convergence table is empty")
    names = t.norm_names
    refs = [n for n in names if n in t.predicted]
    N = np.array([r.N for r in t.records], dtype=float)
    cols = [N] + [np.array([r.norms[n] for r in t.records]) for n in names]
    for n in refs:
        last = t.records[-1].norms[n]
        cols.append(last * (N / N[-1]) ** (-t.predicted[n]))
    header = "# N " + " ".join(names) + " " + " ".join(f"ref_{n}" for n in refs)
    body = ["%d" % int(row[0]) + " " + " ".join(f"{v:.10e}" for v in row[1:]) for row in np.column_stack(cols)]
    Path(path).write_text(header + "\n" + "\n".join(body) + "\n")


_CONFIG_KEYS = {
    "geometry": str,
    "equation": str,
    "alpha": parse_alpha,
    "levels": int,
    "elements-per-edge": int,
    "region-dist": float,
    "hm12-refine": int,
    "energy-refine": int,
    "eoc-window": int,
    "csv": str,
    "plot": str,
    "threads": int,
    "tolerance": float,
    "energy-tolerance": float,
    "global-l2": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines (flag names without dashes prefix); ``#`` comments."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key.startswith("rate-"):
            out.setdefault("rate_overrides", {})[key[5:].replace("-", "_")] = parse_alpha(value)
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key.replace("-", "_")] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if "global_l2" in out:
        out["report_global_l2"] = out.pop("global_l2")
    return out


def config_from_mapping(values: dict) -> ExperimentConfig:
    allowed = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    return replace(ExperimentConfig(), **values)
