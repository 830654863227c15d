"""Tests for scenario runs, suites and the derived configs."""

import math
from pathlib import Path

import pytest

from shockfit.config import ConfigError, load_config, parse_config
from shockfit.report import OUTCOME_COMPLETED, OUTCOME_STOPPED
from shockfit.scenarios import (
    ScenarioError,
    build_laws,
    parse_lambdas,
    refinement_config,
    run_scenario,
    run_suite,
    spectrum_config,
)

ACCEPTANCE = Path(__file__).resolve().parents[1] / "config" / "suites" / "acceptance"


def _acceptance(stem: str):
    return load_config(ACCEPTANCE / "{}.yaml".format(stem))


# ── Builders ──────────────────────────────────────────────────────────────────

def test_per_side_sources() -> None:
    left, right = build_laws(_acceptance("a03_phase_closed_form"))
    assert left.same_flux(right)
    assert left.g(1.0) == pytest.approx(0.0)
    assert right.g(-1.0) == pytest.approx(0.0)
    assert left.dg(0.0) == pytest.approx(-2.0)


def test_parse_lambdas() -> None:
    assert parse_lambdas([1, [0.0, 2.0]]) == [complex(1, 0), complex(0, 2)]
    with pytest.raises(ConfigError):
        parse_lambdas(["one"])


# ── Fast scenarios ────────────────────────────────────────────────────────────

def test_toy_blowup_scenario() -> None:
    report = run_scenario(_acceptance("a04_toy_blowup"))
    assert report.passed
    assert report.metrics["toy.0.closed_form"] == pytest.approx(math.log(2.0))
    assert report.metrics["toy.1.closed_form"] is None
    assert {"blowup_time", "bounded_slope"} <= {c.name for c in report.log.checks}


def test_resolvent_scenario() -> None:
    cfg = parse_config({"name": "r", "kind": "resolvent_check", "seed": 7,
                        "resolvent": {"n_problems": 5}})
    report = run_scenario(cfg)
    assert report.passed
    assert report.metrics["resolvent_problems"] == 5


def test_extension_scenario() -> None:
    cfg = parse_config({"name": "e", "kind": "extension_check", "seed": 9,
                        "extension": {"n_samples": 25}})
    report = run_scenario(cfg)
    assert report.passed
    assert "extension_gluing" in report.log


def test_spectrum_scenario() -> None:
    report = run_scenario(_acceptance("a08_spectrum"))
    assert report.passed
    assert [row[2] for row in report.spectrum] == [
        "eigenvalue", "essential_spectrum", "resolvent_set",
    ]


def test_frozen_merge_scenario() -> None:
    report = run_scenario(_acceptance("a05a_merge_frozen"))
    assert report.passed, report.log.failed
    assert report.metrics["t_star"] == pytest.approx(1.0, abs=1e-3)
    assert report.metrics["x_star"] == pytest.approx(0.4, abs=1e-3)


def test_swallowed_bumps_meet_one_sided_rate() -> None:
    """Bumps on the interface decay faster than g'(±1) = -2; the bound is one-sided."""
    bump = {"shape": "sech", "amplitude": 0.05, "width": 1.0, "center": 0.0}
    cfg = parse_config({
        "name": "swallow", "kind": "riemann_shock",
        "law": {"flux": "burgers", "source": "bistable"},
        "state": {"u_minus": 1.0, "u_plus": -1.0},
        "perturbation": {"left": bump, "right": bump},
        "numerics": {"t_final": 2.0, "n_curves": 257, "x_span": [-10.0, 10.0]},
        "checks": {"fit_window": [0.5, 1.5], "rate_slack": 0.2},
    })
    report = run_scenario(cfg)
    for side in ("left", "right"):
        rec = report.log["rate_" + side]
        assert rec.details["max"] == pytest.approx(-1.8)
        assert rec.passed
        assert rec.value < -2.2


def test_rate_band_and_slack_exclusive() -> None:
    cfg = parse_config({"name": "m", "kind": "constant_state", "state": {"u_bar": -1.0},
                        "checks": {"rate_band": [-2.2, -1.8], "rate_slack": 0.2}})
    with pytest.raises(ConfigError, match="exclusive"):
        run_scenario(cfg)


def test_non_admissible_shock_stops() -> None:
    cfg = parse_config({
        "name": "rarefaction", "kind": "riemann_shock",
        "law": {"flux": "burgers", "source": "bistable"},
        "state": {"u_minus": -1.0, "u_plus": 1.0},
    })
    report = run_scenario(cfg)
    assert report.outcome == OUTCOME_STOPPED
    assert not report.passed
    assert report.log.failed == ["admissible"]
    assert report.metrics["stages_completed"] == "law,admissibility"
    assert "OLEINIK_VIOLATED" in report.metrics["admissibility_reasons"]


def test_unstable_equilibrium_stops() -> None:
    cfg = parse_config({
        "name": "unstable", "kind": "constant_state",
        "law": {"source": "bistable"}, "state": {"u_bar": 0.0},
    })
    report = run_scenario(cfg)
    assert report.outcome == OUTCOME_STOPPED
    assert report.metrics["g_prime"] == pytest.approx(1.0)


def test_missing_state_is_stage_error() -> None:
    cfg = parse_config({"name": "m", "kind": "riemann_shock", "state": {"u_minus": 1.0}})
    with pytest.raises(ScenarioError) as exc:
        run_scenario(cfg)
    assert exc.value.stage == "admissibility"
    assert isinstance(exc.value.cause, ConfigError)


def test_fit_window_outside_run_rejected() -> None:
    cfg = parse_config({"name": "m", "kind": "constant_state", "state": {"u_bar": -1.0},
                        "numerics": {"t_final": 2.0}, "checks": {"fit_window": [1.0, 4.0]}})
    with pytest.raises(ConfigError):
        run_scenario(cfg)


# ── Suites and derived configs ────────────────────────────────────────────────

def test_run_suite_collects_errors(tmp_path: Path) -> None:
    suite = tmp_path / "mini"
    suite.mkdir()
    (suite / "a.yaml").write_text(
        "name: a\nkind: resolvent_check\nresolvent:\n  n_problems: 2\n", encoding="utf-8",
    )
    (suite / "b.yaml").write_text("name: b\nkind: nonsense\n", encoding="utf-8")
    results = run_suite("mini", tmp_path)
    assert [p.name for p, _, _ in results] == ["a.yaml", "b.yaml"]
    assert results[0][1] is not None and results[0][1].outcome == OUTCOME_COMPLETED
    assert results[1][1] is None and isinstance(results[1][2], ConfigError)


def test_refinement_config() -> None:
    cfg = refinement_config(_acceptance("a02_riemann_shock"), 0.01, 2)
    assert cfg.oracle["dx_levels"] == [0.01, 0.005, 0.0025]
    assert cfg.oracle["enabled"] is False
    with pytest.raises(ConfigError):
        refinement_config(_acceptance("a04_toy_blowup"), 0.01, 2)
    with pytest.raises(ConfigError):
        refinement_config(_acceptance("a02_riemann_shock"), 0.01, 0)


def test_spectrum_config() -> None:
    cfg = spectrum_config(_acceptance("a02_riemann_shock"), "-3:1:3,0:1:2")
    assert cfg.kind == "spectrum_scan"
    assert cfg.spectrum["lambda_grid"] == "-3:1:3,0:1:2"
    assert cfg.state["u_minus"] == 1.0
    report = run_scenario(cfg)
    assert len(report.spectrum) == 6
    with pytest.raises(ValueError):
        spectrum_config(_acceptance("a02_riemann_shock"), "bad")


# ── Acceptance suite ──────────────────────────────────────────────────────────

@pytest.mark.slow
@pytest.mark.parametrize("stem", [
    "a01_constant_state",
    "a02_riemann_shock",
    "a03_phase_closed_form",
    "a05b_merge_bistable",
    "a06_oracle_convergence",
    "a07_resolvent",
    "a09_extension",
    "a10_tv_decay",
])
def test_acceptance_scenario_passes(stem: str) -> None:
    report = run_scenario(_acceptance(stem))
    assert report.outcome == OUTCOME_COMPLETED
    assert report.passed, report.log.failed
