"""Acceptance suite shared by ``bem-local verify`` and the test-suite gate.

Every criterion returns a :class:`CriterionResult`; :func:`run_all` prints
one ``PASS``/``FAIL`` line per criterion. Convergence runs are cached per
process, so criteria that read the same run do not repeat it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .geometry import canonical_geometry, distance_selector, initial_mesh, refine_uniform, select_region
from .harness import ConvergenceTable, ExperimentConfig, predicted_rates, run_experiment
from .norms import flux_error, h1_seminorm_error_local, neg_half_norm_local
from .operators import assemble_rhs_symm, assemble_stabilization, assemble_V, assemble_W, hat_integrals
from .quadrature import INV_2PI, slp_pair_oracle
from .solutions import SingularSolution, solution_for
from .solver import galerkin_solve_hypsing, galerkin_solve_symm

__all__ = ["CriterionResult", "CRITERIA", "run_all", "experiment"]

RUNTIME_LIMIT = 300.0
ORACLE_TOL = 1e-9
STABILITY_LIMIT = 0.02


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.title}: {self.detail}"


@lru_cache(maxsize=None)
def experiment(geometry: str, alpha: float, equation: str = "symm", levels: int = 7) -> ConvergenceTable:
    return run_experiment(ExperimentConfig(geometry=geometry, equation=equation, alpha=alpha, levels=levels))


def _local_rate(number: int, geometry: str, alpha: float, label: str, tol: float) -> CriterionResult:
    t = experiment(geometry, alpha)
    eoc = t.eoc["l2_local"]
    pred = predicted_rates(geometry, alpha)["l2_local"]
    ok = abs(eoc - pred) <= tol
    detail = f"EOC {eoc:.4f}, predicted {pred:.4f} +- {tol:.2f}"
    if number == 1:
        ok = ok and t.seconds <= RUNTIME_LIMIT
        detail += f", runtime {t.seconds:.0f}s (limit {RUNTIME_LIMIT:.0f}s) at N={t.records[-1].N}"
    return CriterionResult(number, label, ok, detail)


def criterion_1():
    return _local_rate(1, "lshape", 1 / 3, "L-shape symm alpha=1/3 local L2 rate", 0.10)


def criterion_2():
    return _local_rate(2, "lshape", 1 / 8, "L-shape symm alpha=1/8 local L2 rate", 0.10)


def criterion_3():
    return _local_rate(3, "zshape", 1 / 3, "Z-shape symm alpha=1/3 local L2 rate", 0.08)


def criterion_4():
    return _local_rate(4, "zshape", 1 / 8, "Z-shape symm alpha=1/8 local L2 rate", 0.08)


def criterion_5():
    parts, ok = [], True
    for g in ("lshape", "zshape"):
        for a, label in ((1 / 3, "1/3"), (1 / 8, "1/8")):
            eoc = experiment(g, a).eoc["energy_global"]
            good = abs(eoc - a) <= 0.08
            ok &= good
            parts.append(f"{g} {label}: {eoc:.4f}{'' if good else ' (off)'}")
    return CriterionResult(5, "global energy rate = alpha +- 0.08", ok, "; ".join(parts))


def criterion_6():
    t = experiment("lshape", 1 / 3)
    below = all(r.norms["hm12_local"] <= r.norms["l2_local"] for r in t.records)
    gap = abs(t.eoc["hm12_local"] - t.eoc["l2_local"])
    ok = below and gap <= 0.12
    detail = f"H^-1/2 <= L2 at every level: {below}; EOC {t.eoc['hm12_local']:.4f} vs {t.eoc['l2_local']:.4f} (gap {gap:.4f} <= 0.12)"
    return CriterionResult(6, "local H^-1/2 below local L2 with the same rate", ok, detail)


def criterion_7(levels: int = 7):
    p = canonical_geometry("square")
    sol = SingularSolution(1.0, 0.0, (0.0, 0.0))
    m = initial_mesh(p, elements_per_edge=6)
    worst_symm = worst_hyp = 0.0
    for _ in range(levels):
        m = refine_uniform(m)
        V = assemble_V(m)
        phi = galerkin_solve_symm(m, sol, V).values
        worst_symm = max(worst_symm, float(np.max(np.abs(phi - m.normals[:, 0]))))
        u = galerkin_solve_hypsing(m, sol, V).values
        a = hat_integrals(m)
        target = m.nodes[:, 0] - (a @ m.nodes[:, 0]) / np.sum(a)
        worst_hyp = max(worst_hyp, float(np.max(np.abs(u - target))))
    ok = worst_symm <= 1e-7 and worst_hyp <= 1e-7
    detail = f"max |phi_h - n_x| = {worst_symm:.2e}, max |u_h - (x - mean)| = {worst_hyp:.2e} over {levels} levels (tol 1e-7)"
    return CriterionResult(7, "exact reproduction for alpha=1 on the square", ok, detail)


def _oracle_meshes():
    return [
        initial_mesh(canonical_geometry("square"), elements_per_edge=4),
        initial_mesh(canonical_geometry("lshape"), elements_per_edge=2),
        initial_mesh(canonical_geometry("zshape"), elements_per_edge=2),
    ]


def criterion_8():
    checks = []
    meshes = _oracle_meshes()
    worst_v = 0.0
    for m in meshes:
        V = assemble_V(m).values
        for i in range(m.n_elements):
            for j in range(i, m.n_elements):
                o = -INV_2PI * slp_pair_oracle(m.starts[i], m.ends[i], m.starts[j], m.ends[j], 1e-10)
                worst_v = max(worst_v, abs(o - V[i, j]), abs(o - V[j, i]))
    checks.append(("V vs oracle", worst_v, worst_v <= ORACLE_TOL))

    worst_k = worst_w = worst_orth = 0.0
    spd = True
    for m in meshes:
        b = assemble_rhs_symm(m, lambda x: np.ones(len(x))).values
        worst_k = max(worst_k, float(np.max(np.abs(b))))
        W = assemble_W(m).values
        worst_w = max(worst_w, float(np.max(np.abs(W.sum(axis=1)))))
        try:
            np.linalg.cholesky(W + assemble_stabilization(m).values)
        except np.linalg.LinAlgError:
            spd = False
        s = galerkin_solve_symm(m, solution_for(m.polygon, 2 / 3))
        worst_orth = max(worst_orth, s.orthogonality_residual())
    checks.append(("(1/2+K)1", worst_k, worst_k <= 1e-8))
    checks.append(("W row sums", worst_w, worst_w <= 1e-12))
    checks.append(("W+aa^T SPD", 0.0, spd))
    checks.append(("orthogonality", worst_orth, worst_orth <= 1e-8))

    # local H1 error of the flux problem on the L-shape decreases over 4 levels
    p = canonical_geometry("lshape")
    sol = solution_for(p, 2 / 3)
    m = initial_mesh(p, elements_per_edge=6)
    region = select_region(m, distance_selector(p, 0.3))
    errs = []
    for _ in range(4):
        m = refine_uniform(m)
        u = galerkin_solve_hypsing(m, sol).values
        errs.append(h1_seminorm_error_local(m, u, sol, region))
    mono = all(b < a for a, b in zip(errs[:-1], errs[1:]))
    checks.append(("local H1 decreasing", errs[-1], mono))
    ok = all(c[2] for c in checks)
    detail = ", ".join(f"{name} {'ok' if good else 'BAD'} ({val:.1e})" for name, val, good in checks)
    return CriterionResult(8, "oracle and property suite", ok, detail)


def criterion_9(min_n: int = 256):
    p = canonical_geometry("lshape")
    sol = solution_for(p, 1 / 3)
    m = initial_mesh(p, elements_per_edge=6)
    region = select_region(m, distance_selector(p, 0.3))
    worst = 0.0
    checked = []
    for _ in range(7):
        m = refine_uniform(m)
        if m.n_elements < min_n:
            continue
        phi = galerkin_solve_symm(m, sol).values
        e = flux_error(m, phi, sol)
        n4 = neg_half_norm_local(e, region, 4)
        n8 = neg_half_norm_local(e, region, 8)
        worst = max(worst, abs(n8 - n4) / n4)
        checked.append(m.n_elements)
    ok = worst < STABILITY_LIMIT
    detail = f"max relative change {100 * worst:.3f}% (< {100 * STABILITY_LIMIT:.0f}%) at N={checked}"
    return CriterionResult(9, "H^-1/2 projection stability (refine 4 -> 8)", ok, detail)


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_criterion(number: int) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[number]()
    except Exception as exc:  # a crash is a failure of that criterion, not of the suite
        res = CriterionResult(number, "error", False, f"{type(exc).__name__}: {exc}")
    res.detail += f" [{time.perf_counter() - t0:.0f}s]"
    return res


def run_all(only=None, echo: bool = True) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if not only else sorted(only)
    out = []
    for n in numbers:
        res = run_criterion(n)
        if echo:
            print(res.line(), flush=True)
        out.append(res)
    return out
