import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pucci_homog.cell import SchemeKind, SolverParams
from pucci_homog.errors import ConfigurationError
from pucci_homog.grid import Sym2
from pucci_homog.measure import MeasureParams
from pucci_homog.sweep import (
    CSV_HEADER,
    ExperimentConfig,
    build_operator,
    compute_record,
    emit,
    level_set,
    q_values,
    record_to_csv_row,
    run_single,
    run_sweep,
)
from pucci_homog.validate import check_determinism

TINY_OPERATOR = {
    "family": "pucci_max",
    "a": {"kind": "checkerboard", "cells_per_side": 4, "high": 2.0},
    "A": {"kind": "checkerboard", "cells_per_side": 4, "high": 2.0, "scale": 3.0},
}


def tiny_config(**overrides):
    base = dict(
        operator=TINY_OPERATOR,
        q_grid={"kind": "diag_list", "values": [[1.0, -1.0], [-1.0, -2.0]]},
        grid_n=20,
        seed=0,
        solver=SolverParams(tol=1e-8),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_json_round_trip(tmp_path):
    cfg = tiny_config()
    path = tmp_path / "config.json"
    cfg.to_json(path)
    loaded = ExperimentConfig.from_json(path)
    assert loaded.to_dict() == cfg.to_dict()


def test_config_rejects_bad_inputs(tmp_path):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"q_grid": {"kind": "diag_list", "values": []}})
    with pytest.raises(ConfigurationError):
        tiny_config(l_bar_route="nope")
    with pytest.raises(ConfigurationError):
        tiny_config(jobs=0)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(bad)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


def test_build_operator_errors():
    with pytest.raises(ConfigurationError):
        build_operator(tiny_config(operator={"family": "unknown"}))
    with pytest.raises(ConfigurationError):
        build_operator(tiny_config(operator={"family": "pucci_smooth", "a": 1.0, "A": 3.0}))
    with pytest.raises(ConfigurationError):
        build_operator(tiny_config(operator={"family": "pucci_max", "a": 1.0}))
    with pytest.raises(ConfigurationError):  # cells do not divide the grid
        build_operator(
            tiny_config(operator={"family": "pucci_max", "a": {"kind": "checkerboard", "cells_per_side": 7}, "A": 3.0})
        )


def test_q_values_kinds():
    cfg = tiny_config(q_grid={"kind": "diag_range", "min": -3.0, "max": 3.0, "step": 0.5})
    qs = q_values(cfg)
    assert len(qs) == 13 * 13
    assert qs[0].a11 == -3.0 and qs[-1].a22 == 3.0
    explicit = tiny_config(q_grid={"kind": "explicit", "matrices": [[1.0, 0.5, -1.0]]})
    (q,) = q_values(explicit)
    assert (q.a11, q.a12, q.a22) == (1.0, 0.5, -1.0)
    with pytest.raises(ConfigurationError):
        q_values(tiny_config(q_grid={"kind": "spiral"}))


def test_random_fields_derive_distinct_seeds():
    cfg = tiny_config(
        operator={
            "family": "pucci_max",
            "a": {"kind": "random_checkerboard", "cells_per_side": 4, "high": 2.0},
            "A": {"kind": "random_checkerboard", "cells_per_side": 4, "high": 2.0, "scale": 5.0},
        },
        seed=3,
    )
    spec = build_operator(cfg)
    assert not np.array_equal(spec.coeff.a, spec.coeff.A / 5.0)


def test_sweep_streams_csv_and_report(tmp_path):
    cfg = tiny_config()
    records = run_sweep(cfg, out_dir=tmp_path)
    assert len(records) == 2
    lines = (tmp_path / "records.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    assert all(r.status == "ok" for r in records)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["rng_algorithm"] == "numpy.random.PCG64"
    assert report["summary"]["records"] == 2
    assert report["summary"]["failures"] == 0
    assert report["summary"]["verdicts"]["violated"] == 0
    assert report["config"]["grid_n"] == 20


def test_sweep_determinism_byte_equality():
    res = check_determinism(seed=0)
    assert res.passed, res.detail


def test_sweep_order_independence():
    cfg = tiny_config()
    shuffled = tiny_config(
        q_grid={"kind": "diag_list", "values": [[-1.0, -2.0], [1.0, -1.0]]}
    )
    rows_a = sorted(record_to_csv_row(r) for r in run_sweep(cfg))
    rows_b = sorted(record_to_csv_row(r) for r in run_sweep(shuffled))
    assert rows_a == rows_b


def test_constant_medium_sweep_errors_vanish():
    cfg = tiny_config(
        operator={"family": "pucci_max", "a": 1.0, "A": 3.0},
        q_grid={"kind": "diag_list", "values": [[1.0, -1.0], [2.0, 0.5], [-1.0, -2.0]]},
    )
    for rec in run_sweep(cfg):
        assert rec.status == "ok"
        assert abs(rec.error) <= 1e-7


def test_failed_records_keep_sweep_alive(tmp_path):
    cfg = tiny_config(solver=SolverParams(tol=1e-8, max_iter=3))
    records = run_sweep(cfg, out_dir=tmp_path)
    assert len(records) == 2
    assert all(r.status.startswith("failed:") for r in records)
    lines = (tmp_path / "records.csv").read_text().splitlines()
    assert len(lines) == 3 and "failed" in lines[1]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["summary"]["failures"] == 2


def test_emit_empty_records_header_only(tmp_path):
    cfg = tiny_config()
    csv_path, report_path = emit([], cfg, tmp_path)
    assert open(csv_path).read() == CSV_HEADER + "\n"
    assert json.loads(open(report_path).read())["summary"]["records"] == 0


def test_emit_single_record_row_fields(tmp_path):
    cfg = tiny_config()
    spec = build_operator(cfg)
    rec = compute_record(spec, cfg, Sym2.diag(1.0, -1.0))
    emit([rec], cfg, tmp_path)
    lines = (tmp_path / "records.csv").read_text().splitlines()
    fields = lines[1].split(",")
    assert len(fields) == len(CSV_HEADER.split(","))
    assert float(fields[0]) == 1.0 and float(fields[1]) == -1.0
    assert float(fields[4]) == pytest.approx(rec.error)
    assert fields[9] == "ok"
    assert fields[5] == "0"  # convex family: zero lower bound


def test_run_single_dumps_fields(tmp_path):
    cfg = tiny_config(solver=SolverParams(history_stride=50))
    record, extras = run_single(cfg, Sym2.diag(1.0, -1.0), dump_dir=tmp_path)
    assert record.status == "ok"
    assert (tmp_path / "corrector.csv").exists()
    assert (tmp_path / "invariant_measure.csv").exists()
    assert (tmp_path / "hessian_norm_sq.csv").exists()
    assert (tmp_path / "solver_history.csv").exists()
    assert "cell" in extras and "measure" in extras


def test_level_set_linear_trace_constant_medium():
    cfg = tiny_config(
        operator={"family": "linear", "a": 1.0, "matrix": [[1.0, 0.0], [0.0, 1.0]]},
        l_bar_route="analytic",
    )
    points = level_set(cfg, level=1.0, n_angles=8)
    for p in points:
        s = p.dir1 + p.dir2
        if s > 1e-9:
            assert p.f_bar == pytest.approx(s, abs=1e-7)
            assert p.f_point is not None
            assert p.f_point[0] + p.f_point[1] == pytest.approx(1.0, abs=1e-6)
            assert p.l_point[0] + p.l_point[1] == pytest.approx(1.0, abs=1e-6)
        else:
            assert p.status.startswith("skipped")


def test_level_set_constant_pucci_max_closed_form():
    cfg = tiny_config(operator={"family": "pucci_max", "a": 1.0, "A": 3.0})
    points = level_set(cfg, level=1.0, n_angles=4)
    # directions (1,0), (0,1), (-1,0), (0,-1): F = tr + 2 lam_max^+
    expected = [1.0 + 2.0, 1.0 + 2.0, -1.0, -1.0]
    for p, want in zip(points, expected):
        assert p.f_bar == pytest.approx(want, abs=1e-7)


def test_level_set_rejects_inhomogeneous_family():
    cfg = tiny_config(operator={"family": "monge_ampere", "a": 1.0})
    with pytest.raises(ConfigurationError):
        level_set(cfg, level=1.0, n_angles=4)


def test_cli_round_trip(tmp_path):
    cfg = tiny_config()
    config_path = tmp_path / "config.json"
    cfg.to_json(config_path)
    out_dir = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "pucci_homog", "sweep", "--config", str(config_path),
         "--out", str(out_dir), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out_dir / "records.csv").exists()
    assert (out_dir / "report.json").exists()

    single = subprocess.run(
        [sys.executable, "-m", "pucci_homog", "single", "--config", str(config_path),
         "--lambda1", "1.0", "--lambda2", "-1.0"],
        capture_output=True, text=True,
    )
    assert single.returncode == 0, single.stderr
    payload = json.loads(single.stdout)
    assert payload["status"] == "ok"
    assert payload["verdict"] in ("holds", "holds_within_slack")


def test_cli_configuration_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"operator": {"family": "nope"}, "q_grid": {"kind": "diag_list", "values": []}}))
    proc = subprocess.run(
        [sys.executable, "-m", "pucci_homog", "sweep", "--config", str(bad), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert "configuration error" in proc.stderr


def test_cli_partial_failure_exit_code(tmp_path):
    cfg = tiny_config(solver=SolverParams(max_iter=3))
    config_path = tmp_path / "config.json"
    cfg.to_json(config_path)
    proc = subprocess.run(
        [sys.executable, "-m", "pucci_homog", "sweep", "--config", str(config_path), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1


def test_parallel_jobs_match_serial(tmp_path):
    cfg = tiny_config()
    serial = [record_to_csv_row(r) for r in run_sweep(cfg)]
    cfg_par = tiny_config(jobs=2)
    parallel = [record_to_csv_row(r) for r in run_sweep(cfg_par)]
    assert serial == parallel
