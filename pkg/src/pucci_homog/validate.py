"""Invariant suites behind the `validate` CLI subcommand.

Each check returns (name, passed, detail); run_all prints one line per check
and reports overall success.  These are the cross-cutting consistency
properties: spectral round-trips, linearization against finite differences,
quadratic domination by the semi-concavity constants, exact homogeneity and
numerical isotropy of the homogenized values, byte-level determinism of
sweep output, and the monotone scheme's comparison principle.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cell import SchemeSpec, SolverParams, cfl_dt, discrete_F, solve_cell
from .fields import CoefficientField, PatternSpec, sample
from .grid import GridFunction, Sym2, TorusGrid, eigen_decompose
from .operators import (
    Family,
    OperatorSpec,
    c_bound_field,
    evaluate,
    gradient,
    linearized_value,
)
from .sweep import ExperimentConfig, run_sweep


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_sym2(rng, span=10.0) -> Sym2:
    return Sym2(*(rng.uniform(-span, span, 3)))


def _off_singular(rng, span=3.0, margin=0.05) -> Sym2:
    # Keep a margin to every kink so finite differences stay one-sided.
    while True:
        q = _random_sym2(rng, span)
        lam_min, lam_max = q.eigenvalues()
        if min(abs(lam_min), abs(lam_max), abs(lam_max - lam_min)) > margin:
            return q


def _family_specs(grid: TorusGrid) -> dict[Family, OperatorSpec]:
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=grid.n // 4), grid).values
    return {
        Family.LINEAR: OperatorSpec(
            Family.LINEAR, CoefficientField.single(grid, a0), a0_matrix=Sym2(2.0, 0.5, 1.5)
        ),
        Family.EIGEN_PAIR: OperatorSpec(
            Family.EIGEN_PAIR, CoefficientField.eigen_weights(grid, 2.0 * a0, a0)
        ),
        Family.PUCCI: OperatorSpec(Family.PUCCI, CoefficientField.pair(grid, a0, 3.0 * a0)),
        Family.PUCCI_MAX: OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0)),
        Family.PUCCI_SMOOTH: OperatorSpec(
            Family.PUCCI_SMOOTH, CoefficientField.pair(grid, a0, 3.0 * a0), k=3.0
        ),
        Family.MONGE_AMPERE: OperatorSpec(Family.MONGE_AMPERE, CoefficientField.single(grid, a0)),
    }


def check_eigen_reconstruction(seed: int = 0, count: int = 10_000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        q = _random_sym2(rng)
        worst = max(worst, (eigen_decompose(q).reconstruct() - q).norm())
    return CheckResult(
        "eigen_reconstruction",
        worst <= 1e-10,
        f"max Frobenius error {worst:.3e} over {count} matrices (tol 1e-10)",
    )


def check_gradient_finite_difference(seed: int = 0, count: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    grid = TorusGrid(16)
    eps = 1e-6
    basis = (Sym2(1.0, 0.0, 0.0), Sym2(0.0, 1.0, 0.0), Sym2(0.0, 0.0, 1.0))
    worst = 0.0
    worst_fam = ""
    for family, spec in _family_specs(grid).items():
        for _ in range(count):
            q = _off_singular(rng)
            at = (int(rng.integers(grid.n)), int(rng.integers(grid.n)))
            g = gradient(spec, q, at)
            for e in basis:
                fd = (
                    evaluate(spec, q + eps * e, at) - evaluate(spec, q + (-eps) * e, at)
                ) / (2.0 * eps)
                err = abs(fd - g.dot(e))
                if err > worst:
                    worst, worst_fam = err, family.value
    return CheckResult(
        "gradient_vs_finite_difference",
        worst <= 1e-5,
        f"max |fd - grad| {worst:.3e} (worst family {worst_fam}, tol 1e-5)",
    )


def check_quadratic_domination(seed: int = 0, count: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed + 2)
    grid = TorusGrid(16)
    worst = 0.0
    checked = 0
    for family, spec in _family_specs(grid).items():
        for _ in range(count):
            q = _off_singular(rng)
            m = _random_sym2(rng, span=4.0)
            at = (int(rng.integers(grid.n)), int(rng.integers(grid.n)))
            gap = evaluate(spec, m, at) - linearized_value(spec, q, m, at)
            half_sq = 0.5 * (m - q).norm() ** 2
            slack = 1e-9 * (1.0 + half_sq)
            c_lo = c_bound_field(spec, q, -1)
            c_hi = c_bound_field(spec, q, +1)
            if c_lo is not None:
                worst = max(worst, float(c_lo[at]) * half_sq - gap - slack)
                checked += 1
            if c_hi is not None:
                worst = max(worst, gap - float(c_hi[at]) * half_sq - slack)
                checked += 1
    return CheckResult(
        "quadratic_domination",
        worst <= 0.0,
        f"worst signed violation {worst:.3e} over {checked} bounded sides",
    )


def _chk_spec(n: int) -> OperatorSpec:
    grid = TorusGrid(n)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=20), grid).values
    return OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0))


def check_homogeneity(seed: int = 0) -> CheckResult:
    spec = _chk_spec(40)
    scheme = SchemeSpec.standard()
    params = SolverParams(tol=1e-9)
    q = Sym2.diag(1.0, -1.0)
    base = solve_cell(spec, scheme, q, params).f_bar
    worst = 0.0
    for t in (0.5, 2.0):
        scaled = solve_cell(spec, scheme, t * q, params).f_bar
        worst = max(worst, abs(scaled - t * base) / abs(t * base))
    return CheckResult(
        "f_bar_homogeneity",
        worst <= 1e-3,
        f"max relative defect {worst:.3e} for t in (0.5, 2) (tol 1e-3)",
    )


def check_isotropy(seed: int = 0) -> CheckResult:
    spec = _chk_spec(80)
    scheme = SchemeSpec.standard()
    params = SolverParams(tol=1e-9)
    q = Sym2.diag(2.0, -1.0)
    base = solve_cell(spec, scheme, q, params).f_bar
    rotated = solve_cell(spec, scheme, q.rotated(math.pi / 6.0), params).f_bar
    rel = abs(rotated - base) / abs(base)
    return CheckResult(
        "f_bar_isotropy",
        rel <= 1e-3,
        f"relative eigenbasis dependence {rel:.3e} at 30 degrees (tol 1e-3)",
    )


def _determinism_config(seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        operator={
            "family": "pucci_max",
            "a": {"kind": "random_checkerboard", "p": 0.5, "cells_per_side": 4, "high": 2.0},
            "A": {"kind": "random_checkerboard", "p": 0.5, "cells_per_side": 4, "high": 2.0, "scale": 3.0},
        },
        q_grid={"kind": "diag_list", "values": [[1.0, -1.0], [0.5, 1.5]]},
        grid_n=20,
        seed=seed,
        solver=SolverParams(tol=1e-7),
    )


def check_determinism(seed: int = 0) -> CheckResult:
    cfg = _determinism_config(seed)
    with tempfile.TemporaryDirectory() as tmp:
        dir_a, dir_b = Path(tmp, "a"), Path(tmp, "b")
        run_sweep(cfg, out_dir=dir_a)
        run_sweep(cfg, out_dir=dir_b)
        same = filecmp.cmp(dir_a / "records.csv", dir_b / "records.csv", shallow=False)
    return CheckResult(
        "sweep_determinism",
        same,
        "records.csv byte-identical across two runs" if same else "records.csv differs between runs",
    )


def check_comparison_principle(seed: int = 0, pairs: int = 10) -> CheckResult:
    rng = np.random.default_rng(seed + 3)
    grid = TorusGrid(16)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=4), grid).values
    spec = OperatorSpec(Family.PUCCI, CoefficientField.pair(grid, a0, 3.0 * a0))
    scheme = SchemeSpec.monotone()
    q = Sym2.diag(1.0, -1.0)
    dt = cfl_dt(spec, q)
    worst = 0.0
    for _ in range(pairs):
        u = GridFunction(grid, rng.standard_normal((grid.n, grid.n)) * 0.01)
        v = GridFunction(grid, u.values + rng.uniform(0.0, 0.02, (grid.n, grid.n)))
        u_next = u.values + dt * discrete_F(spec, scheme, q, u).values
        v_next = v.values + dt * discrete_F(spec, scheme, q, v).values
        worst = max(worst, float((u_next - v_next).max()))
    return CheckResult(
        "comparison_principle_step",
        worst <= 1e-13,
        f"max ordering violation {worst:.3e} over {pairs} ordered pairs under CFL",
    )


ALL_CHECKS = (
    check_eigen_reconstruction,
    check_gradient_finite_difference,
    check_quadratic_domination,
    check_homogeneity,
    check_isotropy,
    check_determinism,
    check_comparison_principle,
)


def run_all(seed: int = 0, emit=print) -> list[CheckResult]:
    results = []
    for check in ALL_CHECKS:
        res = check(seed)
        results.append(res)
        emit(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
    return results
