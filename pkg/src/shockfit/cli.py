"""shockfit CLI entrypoint.

  run       one scenario config → timeseries.csv, summary.txt, summary.json
  verify    every config of an acceptance suite
  spectrum  classify a λ grid for the shock of a config
  compare   FV refinement study against the glued solution

Exit codes: 0 all checks pass, 2 a check failed, 3 scenario or config error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional

import click

from shockfit import __version__
from shockfit.constants import EXIT_ERROR, EXIT_FAIL, EXIT_PASS

logger = logging.getLogger("shockfit")


def _out_dir(out: Optional[str], cfg) -> Path:
    if out:
        return Path(out)
    return Path(cfg.output["dir"]) / cfg.name


def _finish(report, out_dir: Path) -> int:
    """Write the report, print its verdict and return the exit code."""
    from shockfit.report import emit_report

    emit_report(report, out_dir)
    for rec in report.log.checks:
        mark = "✓" if rec.passed else "✗"
        click.echo("  {} {:<22} margin={:.6g}".format(mark, rec.name, rec.margin))
    if report.passed:
        click.echo("✓ {} passed ({})".format(report.name, out_dir))
        return EXIT_PASS
    reason = report.outcome if report.outcome != "completed" else ", ".join(report.log.failed)
    click.echo("✗ {} FAILED: {} ({})".format(report.name, reason, out_dir), err=True)
    return EXIT_FAIL


def _run_config(cfg, out: Optional[str]) -> int:
    from shockfit.config import ConfigError
    from shockfit.scenarios import ScenarioError, run_scenario

    try:
        report = run_scenario(cfg)
    except (ConfigError, ScenarioError) as e:
        click.echo("✗ {}: {}".format(cfg.name, e), err=True)
        return EXIT_ERROR
    return _finish(report, _out_dir(out, cfg))


def _load(path: str):
    from shockfit.config import ConfigError, load_config

    try:
        return load_config(path)
    except ConfigError as e:
        click.echo("✗ CONFIG_INVALID: {}".format(e), err=True)
        sys.exit(EXIT_ERROR)


# ─── Root CLI ─────────────────────────────────────────────────────────────────

@click.group()
@click.version_option(version=__version__, prog_name="shockfit")
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level")
def cli(verbose: bool) -> None:
    """shockfit: shock-fitting simulator and decay-rate verification harness."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%SZ",
    )


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Scenario config (YAML)")
@click.option("--out", default=None, help="Output directory (default: output.dir/<name>)")
def run_cmd(config_path: str, out: Optional[str]) -> None:
    """Run one scenario and write its report."""
    cfg = _load(config_path)
    click.echo("Scenario {} ({}) digest={}".format(cfg.name, cfg.kind, cfg.digest[:16]))
    sys.exit(_run_config(cfg, out))


@cli.command("verify")
@click.option("--suite", required=True, help="Suite name under the suites root")
@click.option("--root", default="config/suites", show_default=True, type=click.Path(),
              help="Directory holding the suites")
@click.option("--out", default=None, help="Output root (default: out/<suite>)")
def verify_cmd(suite: str, root: str, out: Optional[str]) -> None:
    """Run every config of an acceptance suite."""
    from shockfit.config import ConfigError, load_config, suite_paths

    try:
        paths = suite_paths(suite, root)
    except ConfigError as e:
        click.echo("✗ {}".format(e), err=True)
        sys.exit(EXIT_ERROR)

    out_root = Path(out) if out else Path("out") / suite
    codes = []
    for path in paths:
        click.echo("── {}".format(path.name))
        try:
            cfg = load_config(path)
        except ConfigError as e:
            click.echo("✗ CONFIG_INVALID: {}".format(e), err=True)
            codes.append(EXIT_ERROR)
            continue
        codes.append(_run_config(cfg, str(out_root / path.stem)))

    passed = sum(1 for c in codes if c == EXIT_PASS)
    click.echo("Suite {}: {}/{} passed".format(suite, passed, len(codes)))
    if EXIT_ERROR in codes:
        sys.exit(EXIT_ERROR)
    sys.exit(EXIT_FAIL if EXIT_FAIL in codes else EXIT_PASS)


@cli.command("spectrum")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Config defining the law and the shock endstates")
@click.option("--lambda-grid", "grid", required=True,
              help="re_min:re_max:n_re,im_min:im_max:n_im")
@click.option("--out", default=None, help="Output directory")
def spectrum_cmd(config_path: str, grid: str, out: Optional[str]) -> None:
    """Classify every λ of a grid; writes spectrum.csv."""
    from shockfit.config import ConfigError
    from shockfit.scenarios import spectrum_config

    cfg = _load(config_path)
    try:
        cfg = spectrum_config(cfg, grid)
    except (ConfigError, ValueError) as e:
        click.echo("✗ {}".format(e), err=True)
        sys.exit(EXIT_ERROR)
    sys.exit(_run_config(cfg, out))


@cli.command("compare")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="riemann_shock or shock_plus_small_shock config")
@click.option("--dx", required=True, type=float, help="Coarsest FV cell width")
@click.option("--refine", default=2, show_default=True, type=int,
              help="Number of halvings of dx")
@click.option("--out", default=None, help="Output directory")
def compare_cmd(config_path: str, dx: float, refine: int, out: Optional[str]) -> None:
    """L1 discrepancy per FV level and the fitted convergence order."""
    from shockfit.config import ConfigError
    from shockfit.scenarios import refinement_config

    cfg = _load(config_path)
    try:
        cfg = refinement_config(cfg, dx, refine)
    except ConfigError as e:
        click.echo("✗ {}".format(e), err=True)
        sys.exit(EXIT_ERROR)
    sys.exit(_run_config(cfg, out))


if __name__ == "__main__":
    cli()
