"""Tests for DecayReport and the files emit_report writes."""

import csv
from pathlib import Path

import orjson
import pytest

from shockfit.config import parse_config
from shockfit.fitting import FitResult
from shockfit.report import (
    OUTCOME_STOPPED,
    TIMESERIES_COLUMNS,
    DecayReport,
    emit_report,
    format_value,
    summary_lines,
)
from shockfit.scenarios import run_scenario


def _report() -> DecayReport:
    report = DecayReport("a02", "riemann_shock", seed=3, digest="ab" * 32)
    report.add_row(0.0, sup_err_left=0.05, psi=0.0)
    report.add_row(0.5, sup_err_left=0.018, psi=0.001)
    report.fits["rate_left"] = FitResult(-2.01, -3.0, 0.01, (1.0, 4.0), 31)
    report.log.check("rate_left", 0.19, value=-2.01)
    report.metrics["t_star"] = None
    report.metrics["psi_infty"] = 1.0 / 3.0
    return report


def test_format_value() -> None:
    assert format_value(None) == "none"
    assert format_value(True) == "true"
    assert format_value(1.0 / 3.0) == "0.333333333333"
    assert format_value(float("-inf")) == "-inf"
    assert format_value(float("nan")) == "nan"
    assert format_value(7) == "7"


def test_add_row_rejects_unknown_column() -> None:
    report = DecayReport("x", "constant_state")
    with pytest.raises(KeyError):
        report.add_row(0.0, latency=1.0)
    row = report.add_row(1.0, psi=0.2)
    assert row["t"] == 1.0 and row["sup_err_left"] is None
    assert report.column("psi") == [0.2]


def test_summary_keys_sorted() -> None:
    lines = summary_lines(_report())
    assert lines == sorted(lines)
    assert "t_star = none" in lines
    assert "psi_infty = 0.333333333333" in lines
    assert "fit.rate_left.rate = -2.01" in lines
    assert "check.rate_left.passed = true" in lines
    assert "passed = true" in lines


def test_stopped_report_fails() -> None:
    report = _report()
    report.outcome = OUTCOME_STOPPED
    assert not report.passed
    assert report.summary()["outcome"] == "stopped"


def test_emit_writes_files(tmp_path: Path) -> None:
    written = emit_report(_report(), tmp_path / "run")
    assert sorted(written) == ["summary", "summary_json", "timeseries"]
    with open(written["timeseries"], newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == list(TIMESERIES_COLUMNS)
    assert rows[2][:2] == ["0.5", "0.018"]
    assert rows[2][2] == ""
    payload = orjson.loads(written["summary_json"].read_bytes())
    assert payload["t_star"] is None
    assert payload["fit.rate_left.n_samples"] == 31
    assert written["summary"].read_text(encoding="utf-8").endswith("\n")


def test_emit_optional_files(tmp_path: Path) -> None:
    report = DecayReport("a08", "spectrum_scan")
    report.spectrum.append((1.0, 0.0, "resolvent_set", None, 1.0, 0.0))
    report.snapshots.append(("left", 0.0, -1.0, 1.0))
    report.fits["phase"] = FitResult.floor((1.0, 4.0), 12)
    written = emit_report(report, tmp_path)
    assert {"spectrum", "snapshots"} <= set(written)
    spectrum = written["spectrum"].read_text(encoding="utf-8").splitlines()
    assert spectrum[1] == "1,0,resolvent_set,,1,0"
    assert orjson.loads(written["summary_json"].read_bytes())["fit.phase.rate"] == "-inf"
    timeseries = written["timeseries"].read_text(encoding="utf-8").splitlines()
    assert len(timeseries) == 1


def test_rerun_is_byte_identical(tmp_path: Path) -> None:
    """Same config and seed give the same bytes in every emitted file."""
    cfg = parse_config({"name": "r", "kind": "resolvent_check", "seed": 7,
                        "resolvent": {"n_problems": 3}})
    first = emit_report(run_scenario(cfg), tmp_path / "one")
    second = emit_report(run_scenario(cfg), tmp_path / "two")
    assert sorted(first) == sorted(second)
    for key, path in first.items():
        assert path.read_bytes() == second[key].read_bytes(), key
