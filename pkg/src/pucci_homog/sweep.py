"""Experiment driver: Q-plane sweeps, level sets, and result persistence.

A sweep walks a grid of diagonal matrices Q = diag(lambda1, lambda2), runs
the full pipeline (cell solve, invariant measure or separable shortcut,
averaged bounds, bound check) at each Q, and streams records to CSV so a
crash loses at most the in-flight value.  Identical config and seed
reproduce the CSV byte-for-byte.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .bounds import (
    HomogenizationRecord,
    Verdict,
    c_bar,
    check_bounds,
    separable_bounds,
    default_slack,
)
from .cell import SchemeKind, SchemeSpec, SolverParams, solve_cell
from .errors import ConfigurationError, NonConvergenceError, StencilDecompositionError
from .fields import RNG_ALGORITHM, CoefficientField, PatternSpec, sample
from .grid import Sym2, TorusGrid
from .measure import (
    MeasureParams,
    invariant_measure,
    homog_linearized,
    separable_analytic,
)
from .operators import Family, OperatorSpec, SemiConcavityValue, UNBOUNDED

CSV_HEADER = "lambda1,lambda2,f_bar,l_bar,error,c_bar_minus,c_bar_plus,iterations,residual,status"

# Families that are positively homogeneous of order one (level-set sweeps
# reconstruct the whole function from one level).
_HOMOGENEOUS_FAMILIES = (Family.LINEAR, Family.EIGEN_PAIR, Family.PUCCI, Family.PUCCI_MAX)


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment deterministically."""

    operator: dict
    q_grid: dict
    grid_n: int = 80
    seed: int = 0
    scheme: SchemeSpec = field(default_factory=SchemeSpec.standard)
    solver: SolverParams = field(default_factory=SolverParams)
    measure: MeasureParams = field(default_factory=MeasureParams)
    l_bar_route: str = "measure"
    delta_num: float | None = None
    jobs: int = 1
    schema_version: int = 1

    def __post_init__(self) -> None:
        if self.schema_version != 1:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        if self.l_bar_route not in ("measure", "analytic"):
            raise ConfigurationError(f"unknown l_bar_route {self.l_bar_route!r}")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")

    @property
    def slack(self) -> float:
        return self.delta_num if self.delta_num is not None else default_slack(self.solver.tol)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "grid_n": self.grid_n,
            "scheme": {
                "kind": self.scheme.kind.value,
                "directions": [list(d) for d in self.scheme.directions],
                "switch_tol": self.scheme.switch_tol,
            },
            "operator": self.operator,
            "solver": {
                "dt": self.solver.dt,
                "tol": self.solver.tol,
                "max_iter": self.solver.max_iter,
                "rhs_const": self.solver.rhs_const,
                "history_stride": self.solver.history_stride,
            },
            "measure": {
                "residual_tol": self.measure.residual_tol,
                "max_iter": self.measure.max_iter,
                "widen": self.measure.widen,
            },
            "q_grid": self.q_grid,
            "l_bar_route": self.l_bar_route,
            "delta_num": self.delta_num,
            "jobs": self.jobs,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        try:
            scheme = _scheme_from_config(d.get("scheme", "standard"))
            solver_d = d.get("solver", {})
            measure_d = d.get("measure", {})
            return ExperimentConfig(
                operator=d["operator"],
                q_grid=d["q_grid"],
                grid_n=int(d.get("grid_n", 80)),
                seed=int(d.get("seed", 0)),
                scheme=scheme,
                solver=SolverParams(
                    dt=solver_d.get("dt"),
                    tol=float(solver_d.get("tol", 1e-8)),
                    max_iter=int(solver_d.get("max_iter", 10_000_000)),
                    rhs_const=float(solver_d.get("rhs_const", 0.0)),
                    history_stride=int(solver_d.get("history_stride", 0)),
                ),
                measure=MeasureParams(
                    residual_tol=float(measure_d.get("residual_tol", 1e-10)),
                    max_iter=int(measure_d.get("max_iter", 2_000_000)),
                    widen=bool(measure_d.get("widen", True)),
                ),
                l_bar_route=d.get("l_bar_route", "measure"),
                delta_num=d.get("delta_num"),
                jobs=int(d.get("jobs", 1)),
                schema_version=int(d.get("schema_version", 1)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"config is missing required key {exc}") from exc

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(data)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _scheme_from_config(value) -> SchemeSpec:
    if isinstance(value, str):
        try:
            return SchemeSpec(SchemeKind(value))
        except ValueError as exc:
            raise ConfigurationError(f"unknown scheme {value!r}") from exc
    try:
        kind = SchemeKind(value.get("kind", "standard"))
        directions = tuple(tuple(d) for d in value.get("directions", ((1, 0), (0, 1), (1, 1), (1, -1))))
        return SchemeSpec(kind, directions, float(value.get("switch_tol", 1.0)))
    except (ValueError, AttributeError) as exc:
        raise ConfigurationError(f"invalid scheme config {value!r}") from exc


_SEED_SLOT = {"a": 0, "A": 1, "a1": 2, "a2": 3}


def _field_values(entry, grid: TorusGrid, default_seed: int, slot: str) -> np.ndarray:
    """Resolve a config entry (number or pattern dict) into field values.

    Random patterns without an explicit seed derive one from the config
    seed plus a fixed per-slot offset, so a and A never share draws.
    """
    if isinstance(entry, (int, float)):
        return np.full((grid.n, grid.n), float(entry))
    if not isinstance(entry, dict):
        raise ConfigurationError(f"coefficient entry must be a number or pattern dict, got {entry!r}")
    entry = dict(entry)
    if entry.get("kind") in ("random_checkerboard", "uniform_random") and "seed" not in entry:
        entry["seed"] = default_seed + _SEED_SLOT[slot]
    try:
        pattern = PatternSpec.from_dict(entry)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid pattern spec {entry!r}: {exc}") from exc
    return sample(pattern, grid).values


def build_operator(config: ExperimentConfig) -> OperatorSpec:
    """Instantiate the OperatorSpec described by the config."""
    op = config.operator
    grid = TorusGrid(config.grid_n)
    try:
        family = Family(op["family"])
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"invalid operator family in config: {exc}") from exc
    kwargs = {}
    if family is Family.LINEAR:
        m = op.get("matrix", [[1.0, 0.0], [0.0, 1.0]])
        kwargs["a0_matrix"] = Sym2.from_array(np.asarray(m, dtype=float))
    if family is Family.PUCCI_SMOOTH:
        if "k" not in op:
            raise ConfigurationError("pucci_smooth needs smoothing parameter k")
        kwargs["k"] = float(op["k"])
    try:
        if family is Family.EIGEN_PAIR:
            coeff = CoefficientField.eigen_weights(
                grid,
                _field_values(op["a1"], grid, config.seed, "a1"),
                _field_values(op["a2"], grid, config.seed, "a2"),
            )
        elif family in (Family.LINEAR, Family.MONGE_AMPERE):
            coeff = CoefficientField.single(grid, _field_values(op.get("a", 1.0), grid, config.seed, "a"))
        else:
            coeff = CoefficientField.pair(
                grid,
                _field_values(op["a"], grid, config.seed, "a"),
                _field_values(op["A"], grid, config.seed, "A"),
            )
        return OperatorSpec(family, coeff, **kwargs)
    except KeyError as exc:
        raise ConfigurationError(f"operator config is missing coefficient {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def q_values(config: ExperimentConfig) -> list[Sym2]:
    """Materialize the Q list described by the config's q_grid."""
    spec = config.q_grid
    kind = spec.get("kind", "diag_range")
    if kind == "diag_range":
        lo = float(spec.get("min", -3.0))
        hi = float(spec.get("max", 3.0))
        step = float(spec.get("step", 0.25))
        count = int(round((hi - lo) / step)) + 1
        lams = [lo + i * step for i in range(count)]
        return [Sym2.diag(l1, l2) for l1 in lams for l2 in lams]
    if kind == "diag_list":
        return [Sym2.diag(float(v[0]), float(v[1])) for v in spec["values"]]
    if kind == "explicit":
        return [Sym2(float(v[0]), float(v[1]), float(v[2])) for v in spec["matrices"]]
    raise ConfigurationError(f"unknown q_grid kind {kind!r}")


def _failed_record(q: Sym2, config: ExperimentConfig, reason: str, f_bar=math.nan, iterations=0, residual=math.nan) -> HomogenizationRecord:
    reason = reason.replace(",", ";").replace("\n", " ")
    return HomogenizationRecord(
        q=q,
        f_bar=f_bar,
        l_bar=math.nan,
        error=math.nan,
        c_bar_minus=UNBOUNDED,
        c_bar_plus=UNBOUNDED,
        iterations=iterations,
        residual=residual,
        measure_residual=math.nan,
        grid_n=config.grid_n,
        scheme=config.scheme.kind.value,
        seed=config.seed,
        status=f"failed: {reason}",
    )


def compute_record(spec: OperatorSpec, config: ExperimentConfig, q: Sym2) -> HomogenizationRecord:
    """Run the full per-Q pipeline, downgrading failures to flagged records."""
    try:
        sol = solve_cell(spec, config.scheme, q, config.solver)
    except NonConvergenceError as exc:
        partial = exc.partial
        return _failed_record(
            q, config, f"cell solve: {exc}",
            f_bar=getattr(partial, "f_bar", math.nan),
            iterations=getattr(partial, "iterations", 0),
            residual=getattr(partial, "residual", math.nan),
        )
    try:
        if config.l_bar_route == "analytic":
            l_bar = separable_analytic(spec, q)
            cb_minus, cb_plus = separable_bounds(spec, q, sol)
            measure_residual = 0.0
        else:
            meas = invariant_measure(spec, q, config.measure)
            l_bar = homog_linearized(spec, q, meas)
            cb_minus = c_bar(spec, q, sol, meas, -1)
            cb_plus = c_bar(spec, q, sol, meas, +1)
            measure_residual = meas.residual
    except (NonConvergenceError, StencilDecompositionError, ValueError) as exc:
        return _failed_record(
            q, config, f"linearized homogenization: {exc}",
            f_bar=sol.f_bar, iterations=sol.iterations, residual=sol.residual,
        )
    return HomogenizationRecord(
        q=q,
        f_bar=sol.f_bar,
        l_bar=l_bar,
        error=sol.f_bar - l_bar,
        c_bar_minus=cb_minus,
        c_bar_plus=cb_plus,
        iterations=sol.iterations,
        residual=sol.residual,
        measure_residual=measure_residual,
        grid_n=config.grid_n,
        scheme=config.scheme.kind.value,
        seed=config.seed,
        status="ok",
    )


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _fmt_bound(v: SemiConcavityValue) -> str:
    return "unbounded" if v.is_unbounded else _fmt(v.value)


def record_lambdas(record: HomogenizationRecord) -> tuple[float, float]:
    """(lambda1, lambda2) column values: the diagonal for diagonal Q,
    otherwise the eigenvalues."""
    q = record.q
    if abs(q.a12) < 1e-15:
        return q.a11, q.a22
    return q.eigenvalues()


def record_to_csv_row(record: HomogenizationRecord) -> str:
    l1, l2 = record_lambdas(record)
    return ",".join(
        [
            _fmt(l1),
            _fmt(l2),
            _fmt(record.f_bar),
            _fmt(record.l_bar),
            _fmt(record.error),
            _fmt_bound(record.c_bar_minus),
            _fmt_bound(record.c_bar_plus),
            str(record.iterations),
            _fmt(record.residual),
            record.status,
        ]
    )


def summarize(records: list[HomogenizationRecord], slack: float) -> dict:
    """Aggregate statistics for the JSON report."""
    verdicts = {v.value: 0 for v in Verdict}
    quadrants = {"q1_pos_pos": 0.0, "q2_neg_pos": 0.0, "q3_neg_neg": 0.0, "q4_pos_neg": 0.0}
    seen = {k: False for k in quadrants}
    failures = 0
    for rec in records:
        if rec.status != "ok":
            failures += 1
            continue
        verdicts[check_bounds(rec, slack).value] += 1
        l1, l2 = record_lambdas(rec)
        key = (
            "q1_pos_pos" if (l1 >= 0 and l2 >= 0)
            else "q2_neg_pos" if l1 < 0 <= l2
            else "q3_neg_neg" if (l1 < 0 and l2 < 0)
            else "q4_pos_neg"
        )
        quadrants[key] = max(quadrants[key], abs(rec.error))
        seen[key] = True
    return {
        "records": len(records),
        "failures": failures,
        "verdicts": verdicts,
        "max_abs_error_by_quadrant": {k: (quadrants[k] if seen[k] else None) for k in quadrants},
    }


def emit(records: list[HomogenizationRecord], config: ExperimentConfig, out_dir, wall_clock: float | None = None) -> tuple[str, str]:
    """Write records.csv and report.json under out_dir; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "records.csv")
    report_path = os.path.join(out_dir, "report.json")
    try:
        with open(csv_path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for rec in records:
                fh.write(record_to_csv_row(rec) + "\n")
        report = {
            "schema_version": config.schema_version,
            "config": config.to_dict(),
            "rng_algorithm": RNG_ALGORITHM,
            "wall_clock_seconds": wall_clock,
            "delta_num": config.slack,
            "summary": summarize(records, config.slack),
        }
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir}: {exc}") from exc
    return csv_path, report_path


_WORKER_STATE: dict = {}


def _init_worker(config_dict: dict) -> None:
    cfg = ExperimentConfig.from_dict(config_dict)
    _WORKER_STATE["config"] = cfg
    _WORKER_STATE["spec"] = build_operator(cfg)


def _sweep_worker(q_entries: tuple[float, float, float]) -> HomogenizationRecord:
    cfg = _WORKER_STATE["config"]
    spec = _WORKER_STATE["spec"]
    return compute_record(spec, cfg, Sym2(*q_entries))


def run_sweep(config: ExperimentConfig, out_dir=None, progress=None) -> list[HomogenizationRecord]:
    """Run the configured Q sweep; streams CSV rows as records complete.

    Per-Q failures are recorded with a failure flag and do not abort the
    sweep.  With jobs > 1 the per-Q tasks run on a worker pool; results are
    collected in input order.
    """
    import os

    spec = build_operator(config)
    qs = q_values(config)
    t0 = time.perf_counter()
    records: list[HomogenizationRecord] = []
    csv_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_fh = open(os.path.join(out_dir, "records.csv"), "w")
        csv_fh.write(CSV_HEADER + "\n")
        csv_fh.flush()
    try:
        if config.jobs > 1:
            with Pool(config.jobs, initializer=_init_worker, initargs=(config.to_dict(),)) as pool:
                iterator = pool.imap(_sweep_worker, [(q.a11, q.a12, q.a22) for q in qs], chunksize=1)
                for i, rec in enumerate(iterator):
                    records.append(rec)
                    if csv_fh is not None:
                        csv_fh.write(record_to_csv_row(rec) + "\n")
                        csv_fh.flush()
                    if progress is not None:
                        progress(i + 1, len(qs), rec)
        else:
            for i, q in enumerate(qs):
                rec = compute_record(spec, config, q)
                records.append(rec)
                if csv_fh is not None:
                    csv_fh.write(record_to_csv_row(rec) + "\n")
                    csv_fh.flush()
                if progress is not None:
                    progress(i + 1, len(qs), rec)
    finally:
        if csv_fh is not None:
            csv_fh.close()
    if out_dir is not None:
        emit(records, config, out_dir, wall_clock=time.perf_counter() - t0)
    return records


def run_single(config: ExperimentConfig, q: Sym2, dump_dir=None):
    """Full pipeline at one Q with the intermediate fields kept.

    Returns (record, extras); extras holds the corrector, the measure (when
    the measure route ran), and the corrector's squared Hessian norm.  With
    dump_dir set, those fields and the solver history go out as CSV.
    """
    import os

    from .cell import diagnostics_to_csv, hessian_norm_sq
    from .fields import field_to_csv

    spec = build_operator(config)
    extras: dict = {}
    try:
        sol = solve_cell(spec, config.scheme, q, config.solver)
    except NonConvergenceError as exc:
        partial = exc.partial
        record = _failed_record(
            q, config, f"cell solve: {exc}",
            f_bar=getattr(partial, "f_bar", math.nan),
            iterations=getattr(partial, "iterations", 0),
            residual=getattr(partial, "residual", math.nan),
        )
        return record, extras
    extras["cell"] = sol
    extras["hessian_norm_sq"] = hessian_norm_sq(sol)
    try:
        if config.l_bar_route == "analytic":
            l_bar = separable_analytic(spec, q)
            cb_minus, cb_plus = separable_bounds(spec, q, sol)
            measure_residual = 0.0
        else:
            meas = invariant_measure(spec, q, config.measure)
            extras["measure"] = meas
            l_bar = homog_linearized(spec, q, meas)
            cb_minus = c_bar(spec, q, sol, meas, -1)
            cb_plus = c_bar(spec, q, sol, meas, +1)
            measure_residual = meas.residual
    except (NonConvergenceError, StencilDecompositionError, ValueError) as exc:
        record = _failed_record(
            q, config, f"linearized homogenization: {exc}",
            f_bar=sol.f_bar, iterations=sol.iterations, residual=sol.residual,
        )
        return record, extras
    record = HomogenizationRecord(
        q=q, f_bar=sol.f_bar, l_bar=l_bar, error=sol.f_bar - l_bar,
        c_bar_minus=cb_minus, c_bar_plus=cb_plus,
        iterations=sol.iterations, residual=sol.residual,
        measure_residual=measure_residual, grid_n=config.grid_n,
        scheme=config.scheme.kind.value, seed=config.seed, status="ok",
    )
    if dump_dir is not None:
        os.makedirs(dump_dir, exist_ok=True)
        field_to_csv(sol.u, os.path.join(dump_dir, "corrector.csv"))
        field_to_csv(extras["hessian_norm_sq"], os.path.join(dump_dir, "hessian_norm_sq.csv"))
        if "measure" in extras:
            field_to_csv(extras["measure"].rho, os.path.join(dump_dir, "invariant_measure.csv"))
        diagnostics_to_csv(sol, os.path.join(dump_dir, "solver_history.csv"))
    return record, extras


@dataclass(frozen=True)
class LevelSetPoint:
    """One ray of a level-set sweep: direction, values, and the scaled
    boundary points for the nonlinear and linearized curves."""

    theta: float
    dir1: float
    dir2: float
    f_bar: float
    l_bar: float
    f_point: tuple[float, float] | None
    l_point: tuple[float, float] | None
    status: str


def level_set(config: ExperimentConfig, level: float, n_angles: int) -> list[LevelSetPoint]:
    """Trace one level set of Fbar and Lbar over rays of diagonal matrices.

    Valid for positively homogeneous order-one families: the boundary point
    along direction (cos t, sin t) is that direction scaled by
    level / Fbar(diag(cos t, sin t)).  Rays where the value is nonpositive
    (with a positive level) are flagged and skipped.
    """
    spec = build_operator(config)
    if spec.family not in _HOMOGENEOUS_FAMILIES:
        raise ConfigurationError(
            f"level sets require a positively homogeneous order-one family, got {spec.family.value}"
        )
    points: list[LevelSetPoint] = []
    for j in range(n_angles):
        theta = 2.0 * math.pi * j / n_angles
        d1, d2 = math.cos(theta), math.sin(theta)
        q = Sym2.diag(d1, d2)
        try:
            sol = solve_cell(spec, config.scheme, q, config.solver)
            if config.l_bar_route == "analytic":
                l_bar = separable_analytic(spec, q)
            else:
                l_bar = homog_linearized(spec, q, invariant_measure(spec, q, config.measure))
        except (NonConvergenceError, StencilDecompositionError, ValueError) as exc:
            points.append(LevelSetPoint(theta, d1, d2, math.nan, math.nan, None, None,
                                        f"failed: {exc}".replace(",", ";")))
            continue
        f_point = None
        l_point = None
        status = "ok"
        floor = 1e-9 * abs(level)
        if level > 0 and sol.f_bar <= floor:
            status = "skipped: f_bar <= 0 on this ray"
        else:
            s = level / sol.f_bar
            f_point = (d1 * s, d2 * s)
        if level > 0 and l_bar <= floor:
            status = "skipped: l_bar <= 0 on this ray" if status == "ok" else status
            l_point = None
        else:
            s = level / l_bar
            l_point = (d1 * s, d2 * s)
        points.append(LevelSetPoint(theta, d1, d2, sol.f_bar, l_bar, f_point, l_point, status))
    return points


def level_set_to_csv(points: list[LevelSetPoint], path) -> None:
    with open(path, "w") as fh:
        fh.write("theta,dir1,dir2,f_bar,l_bar,f_x,f_y,l_x,l_y,status\n")
        for p in points:
            fx, fy = (p.f_point if p.f_point else (math.nan, math.nan))
            lx, ly = (p.l_point if p.l_point else (math.nan, math.nan))
            fh.write(
                ",".join(
                    [_fmt(p.theta), _fmt(p.dir1), _fmt(p.dir2), _fmt(p.f_bar), _fmt(p.l_bar),
                     _fmt(fx), _fmt(fy), _fmt(lx), _fmt(ly), p.status]
                )
                + "\n"
            )
