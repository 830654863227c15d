"""Scenario runner.

Each scenario kind is a fixed list of named stages run in order.  A stage
that raises ends the run with ScenarioError(stage, cause); a stage that
returns STOP ends it early with the report as it stands.  Gradient blow-up
in a fan is such an early stop (outcome ``blown_up``), never an exception.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from shockfit.characteristics import (
    SmoothSolution,
    evolve_smooth,
    slice_negative_part,
    slice_sup,
    toy_blowup_time,
)
from shockfit.config import (
    ConfigError,
    ScenarioConfig,
    check_band,
    load_config,
    parse_config,
    require,
    suite_paths,
)
from shockfit.constants import (
    BLOWUP_THRESHOLD,
    BOUND_SLACK,
    BOUNDED_SLOPE_SLACK,
    ENVELOPE_WINDOW,
    EQUILIBRIUM_TOL,
    EXTENSION_CHECK_POINTS,
    FAN_PAD,
    GLUING_STEP,
    ORACLE_EDGE_CELLS,
    POSITIVITY_SLACK,
    PSI_CHECK_TOL,
    RH_RESIDUAL_TOL,
    SNAPSHOT_SLICES,
    TV_SAMPLES,
)
from shockfit.extension import (
    ExtendedData,
    HalfLineData,
    SegmentData,
    Shape,
    extend_half_line,
    extend_segment,
    make_shape,
    random_spline_shape,
    whole_line_data,
)
from shockfit.fitting import FitError, FitResult, default_window, fit_series
from shockfit.model import (
    DomainError,
    RiemannShockSpec,
    ScalarLaw,
    build_law,
    check_admissibility,
    check_equilibrium,
    check_oleinik,
    source_coefficients,
)
from shockfit.observability import CheckLog
from shockfit.oracle import (
    FvState,
    compare,
    convergence_order,
    evolve_fv,
    fv_merge_time,
    initial_state,
    total_variation,
)
from shockfit.report import OUTCOME_BLOWN_UP, OUTCOME_STOPPED, DecayReport
from shockfit.shocktracker import (
    GluedSolution,
    PhaseFitError,
    ShockPath,
    asymptotic_phase,
    glue,
    phase_deviation,
    track_shock,
    two_shock_evolution,
)
from shockfit.spectral import (
    RESOLVENT_SET,
    ResolventProblem,
    SpectrumVerdict,
    parse_lambda_grid,
    resolvent_solve,
    spectrum_classify,
    spectrum_scan,
)

logger = logging.getLogger(__name__)

STOP = "stop"

Stage = Tuple[str, Callable[[], Optional[str]]]
DataFn = Callable[[np.ndarray], np.ndarray]


class ScenarioError(RuntimeError):
    """A stage of a scenario failed; `stage` names it and `cause` is the original error."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__("stage {} failed: {}: {}".format(stage, type(cause).__name__, cause))
        self.stage = stage
        self.cause = cause


# ── Builders ──────────────────────────────────────────────────────────────────

def build_laws(cfg: ScenarioConfig) -> Tuple[ScalarLaw, ScalarLaw]:
    """(left law, right law); a per-side source replaces the shared one."""
    spec = cfg.law
    shared = build_law(spec["flux"], spec["source"], spec["flux_params"], spec["source_params"])
    laws = []
    for key, side in (("source_left", "left"), ("source_right", "right")):
        override = spec[key]
        if override is None:
            laws.append(shared)
            continue
        coefficients = source_coefficients(override["family"], override["params"])
        description = "{}/{} ({})".format(spec["flux"], override["family"], side)
        laws.append(shared.with_source(coefficients, description))
    return laws[0], laws[1]


def build_shape(spec: Dict[str, Any]) -> Shape:
    return make_shape(
        spec["shape"], spec["amplitude"], spec["width"], spec["center"],
        spec["knots"], spec["values"],
    )


def toy_law(alpha: float, beta: float) -> ScalarLaw:
    """f = αu²/2, g = -βu."""
    return build_law("burgers", "linear", {"scale": alpha}, {"beta": beta, "center": 0.0})


class TanhData:
    """w0·tanh(x): the toy initial data, slope w0 at the origin."""

    smooth = True

    def __init__(self, w0: float) -> None:
        self.w0 = w0

    def values(self, x: np.ndarray) -> np.ndarray:
        return self.w0 * np.tanh(np.asarray(x, dtype=float))

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self.w0 / np.cosh(np.asarray(x, dtype=float)) ** 2


def piecewise_data(pieces: Sequence[ExtendedData], cuts: Sequence[float]) -> DataFn:
    """pieces[i] on (cuts[i-1], cuts[i]); the FV oracle's initial data."""
    edges = np.asarray(cuts, dtype=float)

    def values(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        index = np.searchsorted(edges, x, side="right")
        out = np.empty_like(x)
        for i, piece in enumerate(pieces):
            mask = index == i
            if np.any(mask):
                out[mask] = piece.values(x[mask])
        return out

    return values


def random_resolvent_problem(
    rng: np.random.Generator, n_nodes: int, positive: bool = False,
) -> ResolventProblem:
    """Smooth a, b, F with |a| ≥ 1, Re λ - sup b ∈ [1, 2].

    With positive=True, λ is real and F ≥ 0 so that v̌ ≥ 0.
    """
    sign = float(rng.choice([-1.0, 1.0]))
    a0, a1 = rng.uniform(1.5, 2.0), rng.uniform(0.0, 0.5)
    b0, b1 = rng.uniform(-2.0, 0.0), rng.uniform(0.0, 0.5)
    ka, kb, kf = rng.uniform(0.2, 1.0, size=3)
    pa, pb, pf = rng.uniform(0.0, 2.0 * math.pi, size=3)
    gap = rng.uniform(1.0, 2.0)
    im = 0.0 if positive else rng.uniform(-1.0, 1.0)
    c0, x0, width = rng.uniform(0.5, 1.5), rng.uniform(-5.0, 5.0), rng.uniform(2.0, 6.0)
    c1 = 0.0 if positive else rng.uniform(-1.0, 1.0)

    def a(x: np.ndarray) -> np.ndarray:
        return sign * (a0 + a1 * np.sin(ka * x + pa))

    def b(x: np.ndarray) -> np.ndarray:
        return b0 + b1 * np.cos(kb * x + pb)

    def forcing(x: np.ndarray) -> np.ndarray:
        return c0 * np.exp(-(((x - x0) / width) ** 2)) + c1 * np.cos(kf * x + pf)

    return ResolventProblem(a, b, complex(b0 + b1 + gap, im), forcing, n_nodes=n_nodes)


def parse_lambdas(values: Sequence[Any]) -> List[complex]:
    """Config λ entries: numbers or [re, im] pairs."""
    out = []
    for i, v in enumerate(values):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(complex(v, 0.0))
        elif isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
            out.append(complex(v[0], v[1]))
        else:
            raise ConfigError("spectrum.lambdas[{}]: expected a number or [re, im]".format(i))
    return out


def spectrum_row(verdict: SpectrumVerdict) -> Tuple[Any, ...]:
    psi = verdict.psi_check
    return (
        verdict.lam.real,
        verdict.lam.imag,
        verdict.kind,
        verdict.multiplicity,
        None if psi is None else psi.real,
        None if psi is None else psi.imag,
    )


# ── Scenario run ──────────────────────────────────────────────────────────────

class ScenarioRun:
    """Stages of one scenario in strict order, collecting a DecayReport."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.report = DecayReport(cfg.name, cfg.kind, cfg.seed, cfg.digest)
        self.stages_completed = []  # type: List[str]

        numerics = cfg.numerics
        self.t_final = numerics["t_final"]
        self.dt = numerics["dt"]
        self.window = self._fit_window()

        self.law = None  # type: Optional[ScalarLaw]
        self.right_law = None  # type: Optional[ScalarLaw]
        self.shock = None  # type: Optional[RiemannShockSpec]
        self.slowest_rate = None  # type: Optional[float]
        self.side_rates = {}  # type: Dict[str, float]
        self.data = {}  # type: Dict[str, ExtendedData]
        self.fans = {}  # type: Dict[str, SmoothSolution]
        self.span = None  # type: Optional[Tuple[float, float]]
        self.glued = None  # type: Optional[GluedSolution]
        self.fv_data = None  # type: Optional[DataFn]
        self.series = {}  # type: Dict[str, Tuple[np.ndarray, np.ndarray]]

    @property
    def log(self) -> CheckLog:
        return self.report.log

    @property
    def checks(self) -> Dict[str, Any]:
        return self.cfg.checks

    def stages(self) -> List[Stage]:
        kind = self.cfg.kind
        if kind == "constant_state":
            return [
                ("law", self._stage_law),
                ("equilibrium", self._stage_equilibrium),
                ("data", self._stage_whole_data),
                ("evolve", self._stage_evolve),
                ("rows", self._stage_constant_rows),
                ("oracle", self._stage_constant_oracle),
                ("fit", self._stage_fit),
                ("snapshots", self._stage_snapshots),
            ]
        if kind == "riemann_shock":
            return [
                ("law", self._stage_law),
                ("admissibility", self._stage_admissibility),
                ("data", self._stage_riemann_data),
                ("evolve", self._stage_evolve),
                ("track", self._stage_track),
                ("rows", self._stage_shock_rows),
                ("phase", self._stage_phase),
                ("oracle", self._stage_oracle),
                ("refinement", self._stage_refinement),
                ("fit", self._stage_fit),
                ("snapshots", self._stage_snapshots),
            ]
        if kind == "shock_plus_small_shock":
            return [
                ("law", self._stage_law),
                ("admissibility", self._stage_two_shock_admissibility),
                ("data", self._stage_two_shock_data),
                ("evolve", self._stage_evolve),
                ("merge", self._stage_merge),
                ("rows", self._stage_shock_rows),
                ("oracle", self._stage_oracle),
                ("merge_oracle", self._stage_merge_oracle),
                ("refinement", self._stage_refinement),
                ("fit", self._stage_fit),
                ("snapshots", self._stage_snapshots),
            ]
        if kind == "toy_blowup":
            return [("toy", self._stage_toy)]
        if kind == "resolvent_check":
            return [("resolvent", self._stage_resolvent)]
        if kind == "spectrum_scan":
            return [
                ("law", self._stage_law),
                ("admissibility", self._stage_admissibility),
                ("spectrum", self._stage_spectrum),
            ]
        if kind == "extension_check":
            return [("extension", self._stage_extension)]
        raise ConfigError("unknown scenario kind: {}".format(kind))

    def run(self) -> DecayReport:
        stages = self.stages()
        self.log.log_event("scenario_start", details={"kind": self.cfg.kind})
        for name, fn in stages:
            self.log.log_event("stage_start", name)
            try:
                result = fn()
            except Exception as exc:
                self.log.log_event("stage_error", name, {"error": str(exc)})
                logger.error("Scenario %s: stage %s failed: %s", self.cfg.name, name, exc)
                raise ScenarioError(name, exc) from exc
            self.stages_completed.append(name)
            if result == STOP:
                if self.report.outcome != OUTCOME_BLOWN_UP:
                    self.report.outcome = OUTCOME_STOPPED
                self.log.log_event("scenario_stop", name, {"outcome": self.report.outcome})
                logger.warning("Scenario %s stopped at %s (%s)", self.cfg.name, name,
                               self.report.outcome)
                break
            logger.info("Scenario %s: stage %s OK", self.cfg.name, name)
        self.report.metrics["stages_completed"] = ",".join(self.stages_completed)
        self.log.log_event("scenario_end", details={"passed": self.report.passed})
        return self.report

    # ── helpers ───────────────────────────────────────────────────────────────

    def _fit_window(self) -> Tuple[float, float]:
        checks = self.cfg.checks
        for band, slack in (("rate_band", "rate_slack"),
                            ("gradient_rate_band", "gradient_rate_slack")):
            if checks[band] is not None and checks[slack] is not None:
                raise ConfigError("checks.{} and checks.{} are exclusive".format(band, slack))
        window = checks["fit_window"]
        if window is None:
            return default_window(self.t_final)
        if len(window) != 2 or not 0.0 <= window[0] < window[1] <= self.t_final:
            raise ConfigError("checks.fit_window: need 0 <= lo < hi <= t_final, got {}".format(
                window,
            ))
        return window[0], window[1]

    def _fan_span(
        self, anchors: Sequence[float], datas: Sequence[ExtendedData],
    ) -> Tuple[float, float]:
        given = self.cfg.numerics["x_span"]
        if given is not None:
            if len(given) != 2 or not given[0] < given[1]:
                raise ConfigError("numerics.x_span: expected [lo, hi], got {}".format(given))
            return given[0], given[1]
        lo = min(d.value_range()[0] for d in datas)
        hi = max(d.value_range()[1] for d in datas)
        speed = float(np.max(np.abs(self.law.df(np.linspace(lo, hi, 65)))))
        pad = FAN_PAD + speed * self.t_final + max(d.delta for d in datas)
        return min(anchors) - pad, max(anchors) + pad

    def _oracle_span(self) -> Tuple[float, float]:
        given = self.cfg.oracle["x_span"]
        if given is None:
            return self.span
        if len(given) != 2 or not given[0] < given[1]:
            raise ConfigError("oracle.x_span: expected [lo, hi], got {}".format(given))
        return given[0], given[1]

    def _single_law(self) -> ScalarLaw:
        if self.cfg.law["source_left"] is not None or self.cfg.law["source_right"] is not None:
            raise DomainError("the FV oracle needs one law; per-side sources are not supported")
        return self.law

    def _comparison_window(self, solution: Any, state: FvState, t: float) -> Tuple[float, float]:
        lo, hi = solution.span(t)
        edge = ORACLE_EDGE_CELLS * state.dx
        return max(lo, state.x_left) + edge, min(hi, state.x_right) - edge

    def _fit(self, key: str, times: np.ndarray, values: np.ndarray) -> Optional[FitResult]:
        try:
            fit = fit_series(times, values, self.window)
        except FitError as exc:
            logger.warning("Fit %s failed: %s", key, exc)
            self.report.metrics["fit.{}.error".format(key)] = str(exc)
            return None
        self.report.fits[key] = fit
        return fit

    def _check_band(
        self, name: str, fit: Optional[FitResult], band: Optional[Tuple[float, float]],
    ) -> None:
        if band is None:
            return
        if fit is None:
            self.log.record(name, False, -math.inf, details={"reason": "no fit"})
        elif fit.at_floor:
            self.log.check(name, math.inf, details={"at_floor": True})
        else:
            lo, hi = band
            self.log.check(name, min(fit.rate - lo, hi - fit.rate), value=fit.rate,
                           details={"band": [lo, hi]})

    def _check_max(self, name: str, fit: Optional[FitResult], limit: Optional[float]) -> None:
        if limit is None:
            return
        if fit is None:
            self.log.record(name, False, -math.inf, details={"reason": "no fit"})
        elif fit.at_floor:
            self.log.check(name, math.inf, details={"at_floor": True})
        else:
            self.log.check(name, limit - fit.rate, value=fit.rate, details={"max": limit})

    def _evolve(
        self, name: str, law: ScalarLaw, data: Any, span: Tuple[float, float],
    ) -> SmoothSolution:
        numerics = self.cfg.numerics
        fan = evolve_smooth(
            law, data, self.t_final, numerics["n_curves"], span, self.dt, numerics["store_every"],
        )
        self.fans[name] = fan
        return fan

    def _path_rows(self, paths: Sequence[ShockPath], t: float) -> Dict[str, Optional[float]]:
        path = paths[-1]
        return {
            "psi": path.position(t),
            "psi_prime": path.speed(t),
            "lax_margin_left": float(np.interp(t, path.times, path.lax_left)),
            "lax_margin_right": float(np.interp(t, path.times, path.lax_right)),
        }

    # ── shared stages ─────────────────────────────────────────────────────────

    def _stage_law(self) -> None:
        self.law, self.right_law = build_laws(self.cfg)
        self.report.metrics["law_left"] = self.law.description
        self.report.metrics["law_right"] = self.right_law.description

    def _stage_evolve(self) -> Optional[str]:
        anchors = [d.source.origin for d in self.data.values()]
        smooth = {k: d for k, d in self.data.items() if d.smooth}
        if not smooth:
            logger.info("Data is not C¹; fans skipped, only the FV oracle runs")
            return None
        self.span = self._fan_span(anchors, list(smooth.values()))
        self.report.metrics["fan_span_lo"] = self.span[0]
        self.report.metrics["fan_span_hi"] = self.span[1]
        for name, data in smooth.items():
            law = self.right_law if name == "right" else self.law
            self._evolve(name, law, data, self.span)

        blown = [(n, f) for n, f in self.fans.items() if not f.alive]
        if blown:
            t_blow = min(f.t_blow for _, f in blown)
            self.report.outcome = OUTCOME_BLOWN_UP
            self.report.metrics["blowup_time"] = t_blow
            self.report.metrics["blowup_fans"] = ",".join(n for n, _ in blown)
            self.log.record("fan_alive", False, (t_blow - self.t_final) / self.t_final,
                            value=t_blow)
            return STOP
        peak = max(float(np.max(np.abs(f.w))) for f in self.fans.values())
        self.log.check("fan_alive", 1.0 - peak / BLOWUP_THRESHOLD, value=peak)
        self.report.metrics["max_curve_gap"] = max(
            float(np.max(f.max_gap)) for f in self.fans.values()
        )
        return None

    def _stage_fit(self) -> None:
        checks = self.checks
        fits = {key: self._fit(key, t, v) for key, (t, v) in sorted(self.series.items())}
        rate_band = check_band(self.cfg, "rate_band")
        gradient_band = check_band(self.cfg, "gradient_rate_band")
        for side in ("left", "right"):
            for key, band, slack in (
                ("rate_" + side, rate_band, checks["rate_slack"]),
                ("gradient_rate_" + side, gradient_band, checks["gradient_rate_slack"]),
            ):
                if key not in fits:
                    continue
                if slack is not None and side in self.side_rates:
                    self._check_max(key, fits[key], self.side_rates[side] + slack)
                else:
                    self._check_band(key, fits[key], band)
        if "phase" in fits:
            self._check_max("phase_rate", fits["phase"], checks["phase_rate_max"])
        if "tv" in fits:
            self._check_max("tv_rate", fits["tv"], checks["tv_rate_max"])
        elif checks["tv_rate_max"] is not None:
            self.log.record("tv_rate", False, -math.inf, details={"reason": "no TV series"})

    def _stage_snapshots(self) -> None:
        if not self.cfg.output["snapshots"]:
            return
        for name, fan in sorted(self.fans.items()):
            picks = np.unique(np.linspace(0, len(fan.times) - 1, SNAPSHOT_SLICES).astype(int))
            for k in picks:
                t = float(fan.times[k])
                for x, u in zip(fan.x[k], fan.u[k]):
                    self.report.snapshots.append((name, t, float(x), float(u)))

    # ── constant state ────────────────────────────────────────────────────────

    def _stage_equilibrium(self) -> Optional[str]:
        (u_bar,) = require(self.cfg, "state", "u_bar")
        g, g_prime, stable = check_equilibrium(self.law, u_bar)
        self.slowest_rate = g_prime
        self.side_rates = {"left": g_prime}
        self.report.metrics["g_at_u_bar"] = g
        self.report.metrics["g_prime"] = g_prime
        margin = -g_prime if stable else min(-g_prime, EQUILIBRIUM_TOL - abs(g))
        self.log.record("admissible", stable, margin, value=g_prime, details={"g": g})
        return None if stable else STOP

    def _stage_whole_data(self) -> None:
        shape = build_shape(self.cfg.perturbation["whole"])
        self.data["whole"] = whole_line_data(shape, self.cfg.state["u_bar"], 0.0)

    def _stage_constant_rows(self) -> None:
        fan = self.fans.get("whole")
        if fan is None:
            return
        u_bar = self.cfg.state["u_bar"]
        sign = 1.0 if float(self.law.d2f(u_bar)) >= 0.0 else -1.0
        sups, negs = [], []
        for k, t in enumerate(fan.times):
            sups.append(slice_sup(fan, k, u_bar))
            negs.append(slice_negative_part(fan, k, sign))
            self.report.add_row(float(t), sup_err_left=sups[-1], negpart_grad_left=negs[-1])
        self.series["rate_left"] = (fan.times, np.array(sups))
        self.series["gradient_rate_left"] = (fan.times, np.array(negs))
        self._check_envelope(fan.times, np.array(sups))

    def _check_envelope(self, times: np.ndarray, sups: np.ndarray) -> None:
        factor = self.checks["sup_envelope"]
        if factor is None:
            return
        sup0 = self.data["whole"].source.sup_norm
        lo, hi = ENVELOPE_WINDOW
        mask = (times >= lo) & (times <= hi)
        if sup0 == 0.0:
            self.log.check("sup_envelope", math.inf, details={"at_floor": True})
            return
        if not np.any(mask):
            self.log.record("sup_envelope", False, -math.inf, details={"reason": "no samples"})
            return
        bound = factor * sup0 * np.exp(self.slowest_rate * times[mask])
        ratio = sups[mask] / bound
        self.log.check("sup_envelope", float(1.0 - np.max(ratio)), value=float(np.max(ratio)),
                       details={"factor": factor})

    def _stage_constant_oracle(self) -> None:
        oracle = self.cfg.oracle
        fan = self.fans.get("whole")
        wants_tv = self.checks["tv_rate_max"] is not None
        if not (oracle["enabled"] or fan is None or wants_tv):
            return
        law = self._single_law()
        data = self.data["whole"]
        if self.span is None:
            self.span = self._fan_span([0.0], [data])
        lo, hi = self._oracle_span()
        init = initial_state(data.values, lo, hi, oracle["dx"])

        if fan is not None:
            picks = list(range(0, len(fan.times), oracle["stride"]))
            times = [float(fan.times[k]) for k in picks if fan.times[k] > 0.0]
        else:
            times = list(np.linspace(0.0, self.t_final, TV_SAMPLES + 1)[1:])
        traj = evolve_fv(law, init, self.t_final, oracle["cfl"], output_times=times)
        self.series["tv"] = (traj.times, traj.total_variation())
        self.report.metrics["tv_initial"] = total_variation(init)

        u_bar = self.cfg.state["u_bar"]
        if fan is None:
            for state in traj.states:
                sup = float(np.max(np.abs(state.cells - u_bar)))
                self.report.add_row(state.t, sup_err_left=sup)
            return
        errors = []
        for k in picks:
            t = float(fan.times[k])
            state = traj.at(t)
            l1 = compare(fan, state, t, "L1", window=self._comparison_window(fan, state, t))
            self.report.rows[k]["oracle_l1"] = l1
            errors.append(l1)
        self._check_oracle_l1(errors)

    def _check_oracle_l1(self, errors: Sequence[float]) -> None:
        worst = max(errors) if errors else None
        self.report.metrics["oracle_l1_max"] = worst
        limit = self.checks["oracle_l1_max"]
        if limit is None:
            return
        if worst is None:
            self.log.record("oracle_l1", False, -math.inf, details={"reason": "no samples"})
        else:
            self.log.check("oracle_l1", limit - worst, value=worst)

    # ── Riemann shock ─────────────────────────────────────────────────────────

    def _stage_admissibility(self) -> Optional[str]:
        u_minus, u_plus = require(self.cfg, "state", "u_minus", "u_plus")
        self.shock = RiemannShockSpec.from_endstates(
            self.law, u_minus, u_plus, self.cfg.state["psi0"],
        )
        rep = check_admissibility(self.law, self.shock, right_law=self.right_law)
        self.slowest_rate = rep.slowest_rate
        self.side_rates = {"left": rep.g_prime[0], "right": rep.g_prime[1]}
        margins = rep.margins
        self.report.metrics["sigma"] = self.shock.sigma
        self.report.metrics["g_prime_minus"] = rep.g_prime[0]
        self.report.metrics["g_prime_plus"] = rep.g_prime[1]
        self.report.metrics["admissibility_reasons"] = ",".join(rep.reasons)
        margin = min(margins["spectral_minus"], margins["spectral_plus"], margins["oleinik"])
        self.log.record("admissible", rep.admissible, margin, details=rep.as_dict())
        return None if rep.admissible else STOP

    def _stage_riemann_data(self) -> None:
        shock = self.shock
        amplification = self.cfg.numerics["amplification"]
        pert = self.cfg.perturbation
        left = HalfLineData("left", build_shape(pert["left"]), shock.u_minus, shock.psi0)
        right = HalfLineData("right", build_shape(pert["right"]), shock.u_plus, shock.psi0)
        self.data["left"] = extend_half_line(left, amplification)
        self.data["right"] = extend_half_line(right, amplification)
        self.fv_data = piecewise_data([self.data["left"], self.data["right"]], [shock.psi0])

    def _stage_track(self) -> None:
        path = track_shock(
            self.law, self.fans["left"], self.fans["right"], self.shock.psi0, self.t_final, self.dt,
        )
        self.glued = glue(self.fans["left"], self.fans["right"], path)
        self._check_paths([path])

    def _check_paths(self, paths: Sequence[ShockPath]) -> None:
        threshold = self.checks["lax_margin_min"] or 0.0
        worst = min(p.min_lax_margin for p in paths)
        truncated = [p.label for p in paths if p.truncated]
        self.report.metrics["lax_margin_min"] = worst
        self.log.record(
            "lax_margin", not truncated and worst - threshold > 0.0, worst - threshold,
            value=worst, details={"truncated": truncated},
        )
        if self.checks["rh_residual"]:
            slack = [
                float(np.min(RH_RESIDUAL_TOL * (1.0 + np.abs(p.u_right - p.u_left))
                             - p.rh_residuals(self.law)))
                for p in paths
            ]
            self.log.check("rh_residual", min(slack))
        jumps = [float(np.min(np.abs(p.u_right - p.u_left))) for p in paths]
        constant = all(p.jump_sign_constant() for p in paths)
        self.log.record("jump_sign", constant, min(jumps), value=min(jumps))

    def _stage_shock_rows(self) -> None:
        left, right = self.fans["left"], self.fans["right"]
        glued = self.glued
        u_minus, u_plus = self.shock.u_minus, self.shock.u_plus
        sign_l = 1.0 if float(self.law.d2f(u_minus)) >= 0.0 else -1.0
        sign_r = 1.0 if float(self.law.d2f(u_plus)) >= 0.0 else -1.0
        series = {k: ([], []) for k in (
            "rate_left", "rate_right", "gradient_rate_left", "gradient_rate_right",
        )}  # type: Dict[str, Tuple[List[float], List[float]]]
        for k, t in enumerate(left.times):
            t = float(t)
            if t > glued.horizon + 1e-12:
                break
            paths = glued.active_paths(t)
            lo, hi = paths[0].position(t), paths[-1].position(t)
            values = {
                "rate_left": slice_sup(left, k, u_minus, hi=lo),
                "rate_right": slice_sup(right, k, u_plus, lo=hi),
                "gradient_rate_left": slice_negative_part(left, k, sign_l, hi=lo),
                "gradient_rate_right": slice_negative_part(right, k, sign_r, lo=hi),
            }
            for key, value in values.items():
                series[key][0].append(t)
                series[key][1].append(value)
            self.report.add_row(
                t,
                sup_err_left=values["rate_left"],
                sup_err_right=values["rate_right"],
                negpart_grad_left=values["gradient_rate_left"],
                negpart_grad_right=values["gradient_rate_right"],
                **self._path_rows(paths, t),
            )
        for key, (ts, vs) in series.items():
            self.series[key] = (np.array(ts), np.array(vs))

    def _stage_phase(self) -> None:
        path = self.glued.paths[0]
        sigma = self.shock.sigma
        checks = self.checks
        wanted = checks["phase_rate_max"] is not None or checks["psi_shift"] is not None
        try:
            phase = asymptotic_phase(path, sigma, self.slowest_rate)
        except PhaseFitError as exc:
            logger.warning("Asymptotic phase unavailable: %s", exc)
            self.report.metrics["psi_infty"] = None
            if wanted:
                pairs = (("phase_rate", "phase_rate_max"), ("phase_closed_form", "psi_shift"))
                for name, key in pairs:
                    if checks[key] is not None:
                        self.log.record(name, False, -math.inf, details={"reason": str(exc)})
            return
        shift = phase.psi_infty - self.shock.psi0
        self.report.metrics["psi_infty"] = phase.psi_infty
        self.report.metrics["psi_shift"] = shift
        self.report.metrics["phase_tail_bound"] = phase.tail_bound
        self.series["phase"] = (path.times, phase_deviation(path, sigma, phase.psi_infty))
        if checks["psi_shift"] is not None:
            error = abs(shift - checks["psi_shift"])
            self.log.check("phase_closed_form", checks["psi_shift_tol"] - error, value=shift,
                           details={"expected": checks["psi_shift"]})

    def _stage_oracle(self) -> None:
        oracle = self.cfg.oracle
        if not oracle["enabled"]:
            return
        law = self._single_law()
        glued = self.glued
        lo, hi = self._oracle_span()
        init = initial_state(self.fv_data, lo, hi, oracle["dx"])
        fan_times = self.fans["left"].times
        picks = [k for k in range(0, len(self.report.rows), oracle["stride"])]
        times = [float(fan_times[k]) for k in picks if fan_times[k] > 0.0]
        if not times:
            self._check_oracle_l1([])
            return
        traj = evolve_fv(law, init, times[-1], oracle["cfl"], output_times=times)
        errors = []
        for k in picks:
            t = float(fan_times[k])
            state = traj.at(t)
            l1 = compare(glued, state, t, "L1", window=self._comparison_window(glued, state, t))
            self.report.rows[k]["oracle_l1"] = l1
            errors.append(l1)
        self._check_oracle_l1(errors)

    def _stage_refinement(self) -> None:
        oracle = self.cfg.oracle
        levels = oracle["dx_levels"]
        if not levels:
            if self.checks["oracle_order_min"] is not None:
                self.log.record("oracle_order", False, -math.inf,
                                details={"reason": "oracle.dx_levels not set"})
            return
        if len(levels) < 2 or any(dx <= 0.0 for dx in levels):
            raise ConfigError("oracle.dx_levels: need two or more positive steps")
        law = self._single_law()
        t_cmp = oracle["compare_time"] or self.glued.horizon
        if not 0.0 < t_cmp <= self.glued.horizon + 1e-12:
            raise ConfigError("oracle.compare_time {} outside (0, {}]".format(
                t_cmp, self.glued.horizon,
            ))
        lo, hi = self._oracle_span()
        s_lo, s_hi = self.glued.span(t_cmp)
        edge = ORACLE_EDGE_CELLS * max(levels)
        window = (max(lo, s_lo) + edge, min(hi, s_hi) - edge)
        dxs = sorted(levels, reverse=True)
        errors = []
        for i, dx in enumerate(dxs):
            init = initial_state(self.fv_data, lo, hi, dx)
            state = evolve_fv(law, init, t_cmp, oracle["cfl"]).final
            error = compare(self.glued, state, t_cmp, "L1", window=window)
            errors.append(error)
            self.report.metrics["refine.{}.dx".format(i)] = dx
            self.report.metrics["refine.{}.l1".format(i)] = error
            logger.info("Refinement dx=%.6g: L1=%.6g", dx, error)
        order = convergence_order(dxs, errors)
        self.report.metrics["oracle_order"] = order
        self.report.metrics["compare_time"] = t_cmp
        minimum = self.checks["oracle_order_min"]
        if minimum is not None:
            self.log.check("oracle_order", order - minimum, value=order)

    # ── two shocks ────────────────────────────────────────────────────────────

    def _stage_two_shock_admissibility(self) -> Optional[str]:
        u_minus, u_middle, u_plus, psi_s0 = require(
            self.cfg, "state", "u_minus", "u_middle", "u_plus", "psi_s0",
        )
        psi0 = self.cfg.state["psi0"]
        if not psi_s0 < psi0:
            raise ConfigError("state.psi_s0 must lie left of state.psi0")
        self.shock = RiemannShockSpec.from_endstates(self.law, u_minus, u_plus, psi0)
        small = RiemannShockSpec.from_endstates(self.law, u_minus, u_middle, psi_s0)
        main = RiemannShockSpec.from_endstates(self.law, u_middle, u_plus, psi0)
        checks = [check_oleinik(self.law, small), check_oleinik(self.law, main)]
        ok = all(c.ok for c in checks)
        self.report.metrics["sigma"] = self.shock.sigma
        self.report.metrics["sigma_small"] = small.sigma
        self.report.metrics["sigma_main"] = main.sigma
        self.report.metrics["t_star"] = None
        g_primes = [float(self.law.dg(u_minus)), float(self.right_law.dg(u_plus))]
        self.slowest_rate = max(g_primes)
        self.side_rates = {"left": g_primes[0], "right": g_primes[1]}
        self.log.record("admissible", ok, min(c.margin for c in checks),
                        details={"oleinik": [c.margin for c in checks]})
        return None if ok else STOP

    def _stage_two_shock_data(self) -> None:
        state, pert = self.cfg.state, self.cfg.perturbation
        amplification = self.cfg.numerics["amplification"]
        psi_s0, psi0 = state["psi_s0"], state["psi0"]
        left = HalfLineData("left", build_shape(pert["left"]), state["u_minus"], psi_s0)
        middle = SegmentData(build_shape(pert["middle"]), state["u_middle"], psi_s0, psi0)
        right = HalfLineData("right", build_shape(pert["right"]), state["u_plus"], psi0)
        self.data["left"] = extend_half_line(left, amplification)
        self.data["middle"] = extend_segment(middle, amplification)
        self.data["right"] = extend_half_line(right, amplification)
        self.fv_data = piecewise_data(
            [self.data["left"], self.data["middle"], self.data["right"]], [psi_s0, psi0],
        )

    def _stage_merge(self) -> None:
        state = self.cfg.state
        glued = two_shock_evolution(
            self.law, self.fans["left"], self.fans["middle"], self.fans["right"],
            state["psi_s0"], state["psi0"], self.t_final, self.dt,
        )
        self.glued = glued
        self._check_paths(glued.paths)
        checks = self.checks
        merge = glued.merge
        if merge is not None:
            self.report.metrics["t_star"] = merge.t_star
            self.report.metrics["x_star"] = merge.x_star
            self.report.metrics["merge_speed_jump"] = merge.speed_jump
        if checks["merge_time"] is not None:
            if merge is None:
                self.log.record("merge_time", False, -math.inf, details={"reason": "no merge"})
            else:
                error = abs(merge.t_star - checks["merge_time"])
                self.log.check("merge_time", checks["merge_time_tol"] - error, value=merge.t_star,
                               details={"expected": checks["merge_time"]})
        if checks["merged_speed"]:
            if merge is None:
                self.log.record("merged_speed", False, -math.inf, details={"reason": "no merge"})
            else:
                final = glued.paths[2]
                self.log.record("merged_speed", not final.truncated and final.min_lax_margin > 0.0,
                                final.min_lax_margin, value=float(final.psi_prime[-1]))

    def _stage_merge_oracle(self) -> None:
        if not self.checks["merge_oracle"]:
            return
        glued = self.glued
        if glued.merge is None:
            self.log.record("merge_oracle", False, -math.inf, details={"reason": "no merge"})
            return
        oracle = self.cfg.oracle
        law = self._single_law()
        lo, hi = self._oracle_span()
        dx = oracle["dx"]
        init = initial_state(self.fv_data, lo, hi, dx)
        estimate = fv_merge_time(law, init, self.t_final, oracle["cfl"])
        t_star = glued.merge.t_star
        gap_speed = abs(float(glued.paths[1].psi_prime[-1] - glued.paths[0].psi_prime[-1]))
        tol = 2.0 * dx / max(gap_speed, 1e-12)
        self.report.metrics["fv_merge_time"] = estimate.best
        self.report.metrics["fv_merge_detect"] = estimate.t_detect
        if estimate.best is None:
            self.log.record(
                "merge_oracle", False, -math.inf, details={"reason": "FV did not merge"},
            )
            return
        self.log.check("merge_oracle", tol - abs(estimate.best - t_star), value=estimate.best,
                       details={"t_star": t_star, "tol": tol})

    # ── toy blow-up ───────────────────────────────────────────────────────────

    def _stage_toy(self) -> None:
        toy = self.cfg.toy
        alpha, beta = toy["alpha"], toy["beta"]
        law = toy_law(alpha, beta)
        tol = self.checks["blowup_tol"]
        timing, bounded = [], []
        for i, w0 in enumerate(toy["w0"]):
            closed = toy_blowup_time(alpha, beta, w0)
            fan = evolve_smooth(
                law, TanhData(w0), self.t_final, toy["n_curves"], toy["x_span"], self.dt,
            )
            self.fans["w0_{}".format(i)] = fan
            self.report.metrics["toy.{}.w0".format(i)] = w0
            self.report.metrics["toy.{}.closed_form".format(i)] = closed
            self.report.metrics["toy.{}.fan".format(i)] = fan.t_blow
            if closed is not None and closed <= self.t_final:
                if fan.alive:
                    timing.append(-math.inf)
                else:
                    timing.append(tol - abs(fan.t_blow - closed))
            elif not fan.alive:
                bounded.append(-math.inf)
            else:
                peak = float(np.max(np.abs(fan.w)))
                start = float(np.max(np.abs(fan.w[0])))
                bounded.append(start * (1.0 + BOUNDED_SLOPE_SLACK) - peak)
                self.report.metrics["toy.{}.max_slope".format(i)] = peak
        if timing:
            self.log.check("blowup_time", min(timing))
        if bounded:
            self.log.check("bounded_slope", min(bounded))

    # ── resolvent ─────────────────────────────────────────────────────────────

    def _stage_resolvent(self) -> None:
        spec = self.cfg.resolvent
        rng = np.random.default_rng(self.cfg.seed)
        tol = spec["tol"]
        residual, slack, positivity = [], [], []
        for _ in range(spec["n_problems"]):
            sol = resolvent_solve(random_resolvent_problem(rng, spec["n_nodes"]))
            scale = float(np.max(np.abs(sol.problem.f_values)))
            residual.append(tol - sol.residual() / scale)
            slack.append(sol.sup_bound_slack() + tol)

            pos = resolvent_solve(random_resolvent_problem(rng, spec["n_nodes"], positive=True))
            positivity.append(float(np.min(np.real(pos.values))) + POSITIVITY_SLACK * pos.sup)
        self.report.metrics["resolvent_problems"] = spec["n_problems"]
        self.log.check("resolvent_residual", min(residual))
        self.log.check("resolvent_sup_bound", min(slack))
        self.log.check("resolvent_positivity", min(positivity))

    # ── spectrum ──────────────────────────────────────────────────────────────

    def _stage_spectrum(self) -> None:
        spec = self.cfg.spectrum
        phi = spec["phi"]
        lambdas = parse_lambdas(spec["lambdas"])
        expected = spec["expected"]
        if expected and len(expected) != len(lambdas):
            raise ConfigError("spectrum.expected must match spectrum.lambdas in length")

        mismatches, psi_errors = 0, []
        for i, lam in enumerate(lambdas):
            verdict = spectrum_classify(self.law, self.shock, lam, 0.0, phi, self.right_law)
            self.report.spectrum.append(spectrum_row(verdict))
            self.report.metrics["spectrum.{}.class".format(i)] = verdict.kind
            if expected and verdict.kind != expected[i]:
                mismatches += 1
                logger.warning(
                    "lambda=%s classified %s, expected %s", lam, verdict.kind, expected[i],
                )
            if verdict.kind == RESOLVENT_SET:
                psi_errors.append(abs(verdict.psi_check - phi / lam))
        if expected:
            self.log.check("spectrum_class", -float(mismatches),
                           value=float(len(lambdas) - mismatches))
            if psi_errors:
                worst = max(psi_errors)
                self.log.check("spectrum_psi", PSI_CHECK_TOL - worst, value=worst)

        if spec["lambda_grid"]:
            re_values, im_values = parse_lambda_grid(spec["lambda_grid"])
            for verdict in spectrum_scan(
                self.law, self.shock, re_values, im_values, 0.0, phi, self.right_law,
            ):
                self.report.spectrum.append(spectrum_row(verdict))

    # ── extension ─────────────────────────────────────────────────────────────

    def _stage_extension(self) -> None:
        spec = self.cfg.extension
        lo_c, hi_c = spec["amplification_range"]
        if not 1.0 <= lo_c < hi_c:
            raise ConfigError("extension.amplification_range: need 1 <= lo < hi")
        rng = np.random.default_rng(self.cfg.seed)
        bounds, gluing = [], []
        capped = 0
        for _ in range(spec["n_samples"]):
            shape = random_spline_shape(rng, spec["n_knots"])
            side = "left" if rng.random() < 0.5 else "right"
            amplification = hi_c - rng.uniform(0.0, hi_c - lo_c)
            data = HalfLineData(side, shape, 0.0, 0.0)
            ext = extend_half_line(data, amplification)
            capped += int(ext.delta_capped)
            bounds.append(_extension_bound_margin(data, ext))
            gluing.append(_gluing_margin(data, ext, shape.curvature_bound()))
        self.report.metrics["extension_samples"] = spec["n_samples"]
        self.report.metrics["extension_capped"] = capped
        self.log.check("extension_bounds", min(bounds))
        self.log.check("extension_gluing", min(gluing))


def _extension_bound_margin(data: HalfLineData, ext: ExtendedData) -> float:
    """Smallest slack of the sup bound and the three slope bounds on a dense grid."""
    reach = data.shape.extent() + ext.delta + 1.0
    x = np.linspace(-reach, reach, EXTENSION_CHECK_POINTS)
    values = np.abs(ext.values(x) - data.base)
    slopes = ext.derivative(x)
    neg, pos, sup_slope = data.slope_bounds
    measured = (
        float(np.max(values)),
        float(np.max(np.maximum(-slopes, 0.0))),
        float(np.max(np.maximum(slopes, 0.0))),
        float(np.max(np.abs(slopes))),
    )
    limits = (ext.amplification * data.sup_norm, neg, pos, sup_slope)
    return min(
        limit * (1.0 + BOUND_SLACK) + BOUND_SLACK - m for limit, m in zip(limits, measured)
    )


def _gluing_margin(data: HalfLineData, ext: ExtendedData, curvature: float) -> float:
    """Two-sided jumps of value and slope at the interface and the blend end."""
    eps = GLUING_STEP
    direction = 1.0 if data.side == "left" else -1.0
    points = [data.origin]
    if ext.delta > 0.0:
        points.append(data.origin + direction * ext.delta)
    slope_rate = abs(data.boundary_slope) / ext.delta if ext.delta > 0.0 else 0.0
    sup_slope = data.slope_bounds[2]
    margins = []
    for a in points:
        xs = np.array([a - eps, a + eps])
        dv = abs(float(np.diff(ext.values(xs))[0]))
        dd = abs(float(np.diff(ext.derivative(xs))[0]))
        margins.append(2.0 * eps * sup_slope * (1.0 + 1e-6) + BOUND_SLACK - dv)
        margins.append(2.0 * eps * max(curvature, slope_rate) * (1.0 + 1e-6) + BOUND_SLACK - dd)
    return min(margins)


# ── Entry points ──────────────────────────────────────────────────────────────

def run_scenario(cfg: ScenarioConfig) -> DecayReport:
    logger.info("Running scenario %s (%s)", cfg.name, cfg.kind)
    return ScenarioRun(cfg).run()


def run_suite(
    suite: str, root: Union[str, Path] = "config/suites",
) -> List[Tuple[Path, Optional[DecayReport], Optional[Exception]]]:
    """Every config of the suite in file-name order; errors are collected, not raised."""
    results = []  # type: List[Tuple[Path, Optional[DecayReport], Optional[Exception]]]
    for path in suite_paths(suite, root):
        try:
            report = run_scenario(load_config(path))
        except (ConfigError, ScenarioError) as exc:
            logger.error("Suite %s: %s failed: %s", suite, path.name, exc)
            results.append((path, None, exc))
            continue
        results.append((path, report, None))
    return results


def refinement_config(cfg: ScenarioConfig, dx: float, refine: int) -> ScenarioConfig:
    """cfg with the oracle refinement levels dx, dx/2, ..., dx/2**refine."""
    if cfg.kind not in ("riemann_shock", "shock_plus_small_shock"):
        raise ConfigError("compare needs a riemann_shock or shock_plus_small_shock config")
    if not (dx > 0.0 and refine >= 1):
        raise ConfigError("compare needs dx > 0 and refine >= 1")
    levels = [dx / 2.0 ** k for k in range(refine + 1)]
    return cfg.with_overrides(oracle={"dx_levels": levels, "enabled": False})


def spectrum_config(cfg: ScenarioConfig, grid: str) -> ScenarioConfig:
    """cfg recast as a spectrum scan over the λ grid (same law and endstates)."""
    parse_lambda_grid(grid)
    data = dict(cfg.data, kind="spectrum_scan")
    data["spectrum"] = dict(cfg.spectrum, lambda_grid=grid)
    return parse_config(data, cfg.source)
