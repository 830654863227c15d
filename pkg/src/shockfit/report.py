"""DecayReport and its files.

emit_report writes into one output directory:

    timeseries.csv   one row per stored fan slice, columns TIMESERIES_COLUMNS;
                     cells that do not apply to the scenario are empty
    summary.txt      ``key = value`` lines, sorted by key, floats with 12
                     significant digits, ``none`` for missing values
    summary.json     the same keys as canonical JSON (sorted keys)
    snapshots.csv    source, t, x, u rows, when snapshots were requested
    spectrum.csv     one row per classified λ, for spectrum scans

Summary keys:

    name, kind, seed, digest, outcome, passed
    fit.<series>.{rate, log_constant, residual, window_lo, window_hi,
                  n_samples, at_floor}
    check.<name>.{passed, margin, value}
    any scenario metric (psi_infty, t_star, fv_merge_time, blowup_time.*, ...)
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import orjson

from shockfit.constants import SUMMARY_SIG_DIGITS
from shockfit.fitting import FitResult
from shockfit.observability import CheckLog

logger = logging.getLogger(__name__)

TIMESERIES_COLUMNS = (
    "t",
    "sup_err_left",
    "sup_err_right",
    "negpart_grad_left",
    "negpart_grad_right",
    "psi",
    "psi_prime",
    "lax_margin_left",
    "lax_margin_right",
    "oracle_l1",
)

SNAPSHOT_COLUMNS = ("source", "t", "x", "u")

SPECTRUM_COLUMNS = (
    "lambda_re",
    "lambda_im",
    "class",
    "multiplicity",
    "psi_check_re",
    "psi_check_im",
)

OUTCOME_COMPLETED = "completed"
OUTCOME_BLOWN_UP = "blown_up"
OUTCOME_STOPPED = "stopped"


class DecayReport:
    """Everything a scenario measured, and the verdict of its checks."""

    def __init__(self, name: str, kind: str, seed: int = 0, digest: str = "") -> None:
        self.name = name
        self.kind = kind
        self.seed = seed
        self.digest = digest
        self.log = CheckLog(name)
        self.rows = []  # type: List[Dict[str, Optional[float]]]
        self.fits = {}  # type: Dict[str, FitResult]
        self.metrics = {}  # type: Dict[str, Any]
        self.outcome = OUTCOME_COMPLETED
        self.snapshots = []  # type: List[Tuple[str, float, float, float]]
        self.spectrum = []  # type: List[Tuple[Any, ...]]

    def add_row(self, t: float, **values: Optional[float]) -> Dict[str, Optional[float]]:
        unknown = set(values) - set(TIMESERIES_COLUMNS)
        if unknown:
            raise KeyError("unknown time-series column(s): {}".format(sorted(unknown)))
        row = {c: values.get(c) for c in TIMESERIES_COLUMNS}
        row["t"] = t
        self.rows.append(row)
        return row

    def column(self, name: str) -> List[Optional[float]]:
        return [row[name] for row in self.rows]

    @property
    def passed(self) -> bool:
        return self.outcome == OUTCOME_COMPLETED and self.log.all_passed

    def summary(self) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "digest": self.digest,
            "outcome": self.outcome,
            "passed": self.passed,
        }  # type: Dict[str, Any]
        for key, fit in self.fits.items():
            for field, value in fit.as_dict().items():
                out["fit.{}.{}".format(key, field)] = value
        for rec in self.log.checks:
            out["check.{}.passed".format(rec.name)] = rec.passed
            out["check.{}.margin".format(rec.name)] = rec.margin
            out["check.{}.value".format(rec.name)] = rec.value
        out.update(self.metrics)
        return out

    def __repr__(self) -> str:
        return "DecayReport({}, {}, outcome={}, failed={})".format(
            self.name, self.kind, self.outcome, self.log.failed,
        )


# ── Formatting ────────────────────────────────────────────────────────────────

def format_value(value: Any) -> str:
    """Summary/CSV text for one value; floats use 12 significant digits."""
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "{:.{}g}".format(value, SUMMARY_SIG_DIGITS)
    return str(value)


def _cell(value: Any) -> str:
    return "" if value is None else format_value(value)


def _json_value(value: Any) -> Any:
    # orjson writes non-finite floats as null; keep them readable instead
    if isinstance(value, float) and not math.isfinite(value):
        return format_value(value)
    return value


def summary_lines(report: DecayReport) -> List[str]:
    summary = report.summary()
    return ["{} = {}".format(k, format_value(summary[k])) for k in sorted(summary)]


# ── Writers ───────────────────────────────────────────────────────────────────

def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def emit_report(report: DecayReport, out_dir: Path) -> Dict[str, Path]:
    """Write the report files; I/O errors propagate unchanged."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}  # type: Dict[str, Path]

    path = out_dir / "timeseries.csv"
    _write_csv(path, TIMESERIES_COLUMNS, ([r[c] for c in TIMESERIES_COLUMNS] for r in report.rows))
    written["timeseries"] = path

    path = out_dir / "summary.txt"
    path.write_text("\n".join(summary_lines(report)) + "\n", encoding="utf-8")
    written["summary"] = path

    path = out_dir / "summary.json"
    payload = {k: _json_value(v) for k, v in report.summary().items()}
    path.write_bytes(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))
    written["summary_json"] = path

    if report.snapshots:
        path = out_dir / "snapshots.csv"
        _write_csv(path, SNAPSHOT_COLUMNS, report.snapshots)
        written["snapshots"] = path

    if report.spectrum:
        path = out_dir / "spectrum.csv"
        _write_csv(path, SPECTRUM_COLUMNS, report.spectrum)
        written["spectrum"] = path

    logger.info("Report %s written to %s (%d rows)", report.name, out_dir, len(report.rows))
    return written
