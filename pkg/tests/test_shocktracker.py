"""Tests for shock tracking, gluing, the asymptotic phase and the two-shock merge."""

import numpy as np
import pytest
from scipy.integrate import quad

from shockfit.characteristics import evolve_smooth
from shockfit.extension import make_shape, whole_line_data
from shockfit.model import DomainError, ScalarLaw, build_law, burgers, slope
from shockfit.shocktracker import (
    GluedSolution,
    ValidityError,
    asymptotic_phase,
    glue,
    phase_deviation,
    track_shock,
    two_shock_evolution,
)


def _constant_fan(law, value, t_final, span=(-10.0, 10.0)):
    data = whole_line_data(make_shape("none"), base=value)
    return evolve_smooth(law, data, t_final, n_curves=129, x_span=span)


# ── Single shock ──────────────────────────────────────────────────────────────

def test_standing_shock_stays_put() -> None:
    """1 → -1 under Burgers has σ = 0 and Lax margins 1."""
    law = burgers()
    left, right = _constant_fan(law, 1.0, 2.0), _constant_fan(law, -1.0, 2.0)
    path = track_shock(law, left, right, 0.0, 2.0, dt=0.01)
    assert not path.truncated
    assert path.end == pytest.approx(2.0)
    assert np.allclose(path.psi, 0.0, atol=1e-12)
    assert path.min_lax_margin == pytest.approx(1.0)
    assert np.max(path.rh_residuals(law)) < 1e-12
    assert path.jump_sign_constant()


def test_moving_shock_speed() -> None:
    """1 → 0 moves at 1/2."""
    law = burgers()
    left, right = _constant_fan(law, 1.0, 2.0), _constant_fan(law, 0.0, 2.0)
    path = track_shock(law, left, right, 1.0, 2.0, dt=0.01)
    assert path.position(2.0) == pytest.approx(2.0)
    assert path.position(0.5) == pytest.approx(1.25)
    assert path.speed(1.0) == pytest.approx(0.5)
    with pytest.raises(ValidityError):
        path.position(3.0)


def test_shock_follows_relaxing_left_state() -> None:
    """u₋(0) = 1.1 under u - u³ against -1: ψ' = (u₋(t) - 1)/2 in closed form."""
    law = burgers("bistable")
    t_final = 4.0
    left = evolve_smooth(law, whole_line_data(make_shape("constant", amplitude=0.1), 1.0),
                         t_final, n_curves=33, x_span=(-10.0, 10.0))
    right = _constant_fan(law, -1.0, t_final)
    path = track_shock(law, left, right, 0.0, t_final)

    def u_minus(t: float) -> float:
        return 1.0 / np.sqrt(1.0 + (1.0 / 1.21 - 1.0) * np.exp(-2.0 * t))

    assert not path.truncated
    for t in (0.5, 1.0, 2.0, 4.0):
        assert path.speed(t) == pytest.approx(0.5 * (u_minus(t) - 1.0), abs=1e-9)
        psi, _ = quad(lambda s: 0.5 * (u_minus(s) - 1.0), 0.0, t, epsabs=1e-13)
        assert path.position(t) == pytest.approx(psi, abs=1e-8)


def test_rarefaction_rejected_at_start() -> None:
    law = burgers()
    left, right = _constant_fan(law, -1.0, 1.0), _constant_fan(law, 1.0, 1.0)
    with pytest.raises(ValidityError):
        track_shock(law, left, right, 0.0, 1.0, dt=0.01)


def test_short_fan_rejected() -> None:
    law = burgers()
    left, right = _constant_fan(law, 1.0, 1.0), _constant_fan(law, -1.0, 1.0)
    with pytest.raises(ValidityError):
        track_shock(law, left, right, 0.0, 2.0)


def test_glued_evaluation() -> None:
    """Left state left of ψ, right state right of it, both at ψ."""
    law = burgers()
    left, right = _constant_fan(law, 1.0, 1.0), _constant_fan(law, -1.0, 1.0)
    glued = glue(left, right, track_shock(law, left, right, 0.0, 1.0, dt=0.01))
    assert glued.horizon == pytest.approx(1.0)
    assert glued.evaluate(0.5, -1.0) == pytest.approx(1.0)
    assert glued.evaluate(0.5, 1.0) == pytest.approx(-1.0)
    assert glued.evaluate(0.5, glued.shock_positions(0.5)[0]) == pytest.approx((1.0, -1.0))
    values = glued.evaluate_many(0.5, np.array([-2.0, -0.1, 0.1, 2.0]))
    assert np.allclose(values, [1.0, 1.0, -1.0, -1.0])
    with pytest.raises(ValidityError):
        glued.active_paths(1.5)


def test_glued_needs_middle_for_two_paths() -> None:
    law = burgers()
    left, right = _constant_fan(law, 1.0, 1.0), _constant_fan(law, -1.0, 1.0)
    path = track_shock(law, left, right, 0.0, 1.0, dt=0.01)
    with pytest.raises(DomainError):
        GluedSolution(left, right, (path, path))


# ── Asymptotic phase ──────────────────────────────────────────────────────────

def test_phase_closed_form_linear_relaxation() -> None:
    """A 0.1 offset relaxing at rate 2 shifts a Burgers shock by 0.1/(2·2)."""
    left_law = build_law("burgers", "linear", source_params={"beta": 2.0, "center": 1.0})
    right_law = left_law.with_source([-2.0, -2.0])
    t_final = 8.0
    left = evolve_smooth(left_law, whole_line_data(make_shape("constant", amplitude=0.1), 1.0),
                         t_final, n_curves=129, x_span=(-10.0, 10.0))
    right = _constant_fan(right_law, -1.0, t_final)
    path = track_shock(left_law, left, right, 0.0, t_final)
    phase = asymptotic_phase(path, 0.0, -2.0)
    assert phase.psi_infty == pytest.approx(0.025, abs=1e-4)
    assert phase.tail_bound < 1e-6
    assert phase.fit is not None and phase.fit.rate == pytest.approx(-2.0, abs=0.05)
    deviation = phase_deviation(path, 0.0, phase.psi_infty)
    assert deviation[-1] < deviation[len(deviation) // 2] < deviation[0]


def test_phase_at_floor_has_no_tail() -> None:
    law = burgers()
    left, right = _constant_fan(law, 1.0, 2.0), _constant_fan(law, -1.0, 2.0)
    path = track_shock(law, left, right, 0.3, 2.0, dt=0.01)
    phase = asymptotic_phase(path, 0.0, -2.0)
    assert phase.psi_infty == pytest.approx(0.3)
    assert phase.tail_bound == 0.0
    assert phase.fit is None


def test_phase_rate_hint_must_be_negative() -> None:
    law = burgers()
    left, right = _constant_fan(law, 1.0, 1.0), _constant_fan(law, -1.0, 1.0)
    path = track_shock(law, left, right, 0.0, 1.0, dt=0.01)
    with pytest.raises(DomainError):
        asymptotic_phase(path, 0.0, 0.0)


# ── Two shocks ────────────────────────────────────────────────────────────────

def test_frozen_merge_time() -> None:
    """Speeds 0.9 and -0.1 close a unit gap at t* = 1, x* = 0.4."""
    law = burgers()
    t_final = 2.0
    left = _constant_fan(law, 1.0, t_final)
    middle = _constant_fan(law, 0.8, t_final)
    right = _constant_fan(law, -1.0, t_final)
    glued = two_shock_evolution(law, left, middle, right, -0.5, 0.5, t_final)
    merge = glued.merge
    assert merge is not None
    assert merge.t_star == pytest.approx(1.0, abs=1e-3)
    assert merge.x_star == pytest.approx(0.4, abs=1e-3)
    assert merge.speed_jump == pytest.approx(0.1, abs=1e-6)
    final = glued.paths[2]
    assert not final.truncated
    assert final.end == pytest.approx(t_final)
    assert final.psi_prime[-1] == pytest.approx(0.0, abs=1e-9)
    assert len(glued.active_paths(0.5)) == 2
    assert len(glued.active_paths(1.5)) == 1
    assert glued.evaluate(0.5, 0.1) == pytest.approx(0.8)
    assert glued.evaluate(1.5, 0.3) == pytest.approx(1.0)


@pytest.mark.parametrize("coefficients, states", [
    ([0.0, 0.0, 0.5], (1.0, 0.8, -1.0)),
    ([0.0, 0.0, 0.5], (2.0, 0.5, -0.5)),
    ([0.0, 0.0, 0.5], (1.5, 1.0, 0.0)),
    ([0.0, 0.0, 0.5, 0.1], (1.0, 0.2, -1.0)),
    ([0.0, 0.0, 0.5, 0.1], (1.8, 1.2, 0.4)),
])
def test_merge_speed_jump_is_slope_difference(coefficients, states) -> None:
    """Speed jump at t* equals s_f(u_l, u_r) - s_f(u_c, u_r)."""
    law = ScalarLaw(coefficients)
    u_l, u_c, u_r = states
    t_final = 3.0
    fans = [_constant_fan(law, u, t_final) for u in states]
    glued = two_shock_evolution(law, *fans, -0.5, 0.5, t_final, dt=0.01)
    assert glued.merge is not None
    expected = slope(law, u_l, u_r) - slope(law, u_c, u_r)
    assert glued.merge.speed_jump == pytest.approx(expected, abs=1e-12)
    assert glued.merge.speed_before == pytest.approx(slope(law, u_c, u_r), abs=1e-12)


def test_no_merge_before_final_time() -> None:
    law = burgers()
    left = _constant_fan(law, 1.0, 0.5)
    middle = _constant_fan(law, 0.8, 0.5)
    right = _constant_fan(law, -1.0, 0.5)
    glued = two_shock_evolution(law, left, middle, right, -0.5, 0.5, 0.5, dt=0.01)
    assert glued.merge is None
    assert len(glued.paths) == 2
    assert glued.shock_positions(0.5) == pytest.approx((-0.05, 0.45))


def test_two_shock_order_checked() -> None:
    law = burgers()
    fan = _constant_fan(law, 1.0, 0.5)
    with pytest.raises(DomainError):
        two_shock_evolution(law, fan, fan, fan, 0.5, -0.5, 0.5)
