"""Tests for the command-line entrypoint."""

from pathlib import Path

from click.testing import CliRunner

from shockfit import __version__
from shockfit.cli import cli

RESOLVENT = "name: r\nkind: resolvent_check\nseed: 7\nresolvent:\n  n_problems: 2\n"

SPECTRUM = """\
name: s
kind: spectrum_scan
law:
  flux: burgers
  source: bistable
state:
  u_minus: 1.0
  u_plus: -1.0
spectrum:
  lambdas: [1.0]
  expected: [{expected}]
"""


def _write(directory: Path, name: str, text: str) -> Path:
    path = directory / name
    path.write_text(text, encoding="utf-8")
    return path


def test_version() -> None:
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_run_writes_report(tmp_path: Path) -> None:
    cfg = _write(tmp_path, "r.yaml", RESOLVENT)
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, ["run", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "summary.txt").exists()
    assert (out / "timeseries.csv").exists()
    assert "✓ r passed" in result.output


def test_failed_check_exits_2(tmp_path: Path) -> None:
    cfg = _write(tmp_path, "s.yaml", SPECTRUM.format(expected="eigenvalue"))
    result = CliRunner().invoke(cli, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert (tmp_path / "o" / "spectrum.csv").exists()


def test_invalid_config_exits_3(tmp_path: Path) -> None:
    cfg = _write(tmp_path, "bad.yaml", "name: bad\nkind: toy_blowup\ntoy:\n  alpha: one\n")
    result = CliRunner().invoke(cli, ["run", "--config", str(cfg)])
    assert result.exit_code == 3
    assert "CONFIG_INVALID" in result.output


def test_verify_suite(tmp_path: Path) -> None:
    suite = tmp_path / "suites" / "mini"
    suite.mkdir(parents=True)
    _write(suite, "a.yaml", RESOLVENT)
    _write(suite, "b.yaml", SPECTRUM.format(expected="resolvent_set"))
    args = ["verify", "--suite", "mini", "--root", str(tmp_path / "suites"),
            "--out", str(tmp_path / "out")]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert "Suite mini: 2/2 passed" in result.output
    assert (tmp_path / "out" / "b" / "summary.json").exists()

    _write(suite, "c.yaml", "name: c\nkind: nonsense\n")
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 3
    assert "Suite mini: 2/3 passed" in result.output


def test_verify_missing_suite(tmp_path: Path) -> None:
    result = CliRunner().invoke(cli, ["verify", "--suite", "none", "--root", str(tmp_path)])
    assert result.exit_code == 3


def test_spectrum_bad_grid(tmp_path: Path) -> None:
    cfg = _write(tmp_path, "s.yaml", SPECTRUM.format(expected="resolvent_set"))
    result = CliRunner().invoke(cli, ["spectrum", "--config", str(cfg), "--lambda-grid", "1:2"])
    assert result.exit_code == 3
