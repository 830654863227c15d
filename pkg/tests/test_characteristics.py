"""Tests for characteristic fans, blow-up detection and slice sampling."""

import math

import numpy as np
import pytest

from shockfit.characteristics import (
    BlowUpError,
    CharacteristicState,
    ExtrapolationError,
    advance_characteristic,
    evolve_smooth,
    sample,
    slice_negative_part,
    slice_sup,
    time_grid,
    toy_blowup_time,
)
from shockfit.extension import make_shape, whole_line_data
from shockfit.fitting import fit_decay_rate
from shockfit.model import DomainError, build_law, burgers
from shockfit.scenarios import TanhData


# ── Closed forms ──────────────────────────────────────────────────────────────

def test_toy_blowup_closed_form() -> None:
    """Blow-up exactly when αw0 < -β, at ln(αw0/(αw0+β))/β."""
    assert toy_blowup_time(1.0, 1.0, -2.0) == pytest.approx(math.log(2.0))
    assert toy_blowup_time(1.0, 1.0, -1.0) is None
    assert toy_blowup_time(1.0, 1.0, 0.5) is None
    assert toy_blowup_time(1.0, 0.0, -0.5) == pytest.approx(2.0)


def test_toy_blowup_negative_beta() -> None:
    with pytest.raises(DomainError):
        toy_blowup_time(1.0, -1.0, -2.0)


def test_time_grid_lands_on_final() -> None:
    n, h = time_grid(1.0, 0.3)
    assert n == 4
    assert n * h == pytest.approx(1.0)
    with pytest.raises(DomainError):
        time_grid(0.0, 0.1)


def test_single_curve_step() -> None:
    """Linear flux and source: x moves with speed 1, u and w decay like e^{-t}."""
    law = build_law("linear", "linear", {"speed": 1.0}, {"beta": 1.0})
    state = CharacteristicState(0.0, 1.0, 2.0)
    for _ in range(100):
        state = advance_characteristic(law, state, 0.01)
    assert state.x == pytest.approx(1.0)
    assert state.u == pytest.approx(math.exp(-1.0), rel=1e-9)
    assert state.w == pytest.approx(2.0 * math.exp(-1.0), rel=1e-9)


def test_riccati_closed_form_along_curve() -> None:
    """Burgers, g ≡ 0: w(t) = w0/(1 + w0 t) until the break at t = 1."""
    law = burgers()
    state = CharacteristicState(0.0, 0.0, -1.0)
    for _ in range(500):
        state = advance_characteristic(law, state, 1e-3)
    assert state.t == pytest.approx(0.5)
    assert state.w == pytest.approx(-1.0 / (1.0 - 0.5), rel=1e-9)
    while not state.blown_up:
        state = advance_characteristic(law, state, 1e-3)
    lo, hi = state.bracket
    assert hi - lo == pytest.approx(1e-3)
    assert lo == pytest.approx(1.0, abs=2e-3)
    assert math.isinf(state.w)
    with pytest.raises(BlowUpError) as exc:
        advance_characteristic(law, state, 1e-3)
    assert exc.value.bracket == state.bracket


def test_rk4_fourth_order_in_dt() -> None:
    """Halving dt cuts the Riccati error by at least 2³."""
    law = burgers()

    def error(dt: float) -> float:
        state = CharacteristicState(0.0, 0.0, -0.5)
        for _ in range(int(round(1.0 / dt))):
            state = advance_characteristic(law, state, dt)
        return abs(state.w - (-1.0))

    errors = [error(dt) for dt in (0.1, 0.05, 0.025)]
    assert errors[0] > 0.0
    assert errors[1] <= errors[0] / 8.0
    assert errors[2] <= errors[1] / 8.0


def test_bistable_value_relaxes_at_linear_rate() -> None:
    """u̇ = u - u³ from 1.1: 1/u² = 1 + (1/u0² - 1)e^{-2t}, so u - 1 decays at -2."""
    law = burgers("bistable")
    state = CharacteristicState(0.0, 1.1, 0.0)
    times, gaps = [], []
    for n in range(1, 1001):
        state = advance_characteristic(law, state, 5e-3)
        t = n * 5e-3
        exact = 1.0 / math.sqrt(1.0 + (1.0 / 1.21 - 1.0) * math.exp(-2.0 * t))
        assert state.u == pytest.approx(exact, rel=1e-9)
        times.append(t)
        gaps.append(state.u - 1.0)
    rate, _, _ = fit_decay_rate(times, gaps, (3.0, 5.0))
    assert rate == pytest.approx(-2.0, abs=0.01)


# ── Fans ──────────────────────────────────────────────────────────────────────

def test_linear_transport_exact() -> None:
    """u(t, x) = v0(x - t) for f = u, g = 0."""
    law = build_law("linear", "zero", {"speed": 1.0})
    shape = make_shape("sech", amplitude=0.5)
    sol = evolve_smooth(law, whole_line_data(shape), 2.0, n_curves=801, x_span=(-20.0, 20.0))
    assert sol.alive
    assert sol.horizon == pytest.approx(2.0)
    xs = np.linspace(-5.0, 5.0, 41)
    assert np.allclose(sol.evaluate_many(2.0, xs), shape.value(xs - 2.0), atol=1e-3)
    u, w = sample(sol, 1.3, 0.7)
    assert u == pytest.approx(float(shape.value(np.array([-0.6]))[0]), abs=1e-3)
    assert w == pytest.approx(float(shape.derivative(np.array([-0.6]))[0]), abs=1e-3)


def test_burgers_blowup_time() -> None:
    """Burgers with slope -1 at the origin breaks at t = 1."""
    sol = evolve_smooth(burgers(), TanhData(-1.0), 2.0, n_curves=401, x_span=(-5.0, 5.0))
    assert not sol.alive
    assert sol.t_blow == pytest.approx(1.0, abs=1e-4)
    assert abs(sol.x_blow) < 0.1
    lo, hi = sol.blow_bracket
    assert lo < sol.t_blow < hi
    assert hi - lo <= 1e-5
    assert sol.horizon < lo
    assert sol.horizon < 1.0
    with pytest.raises(BlowUpError) as exc:
        sol.slice_at(1.5)
    assert exc.value.t_blow == sol.t_blow
    assert exc.value.bracket == sol.blow_bracket


def test_bounded_toy_stays_bounded() -> None:
    """α w0 = -β keeps w at its starting value."""
    law = build_law("burgers", "linear", {"scale": 1.0}, {"beta": 1.0, "center": 0.0})
    sol = evolve_smooth(law, TanhData(-1.0), 5.0, n_curves=129, x_span=(-5.0, 5.0))
    assert sol.alive
    assert np.max(np.abs(sol.w)) <= 1.0 * (1.0 + 1e-3)


def test_sup_envelope_constant_state() -> None:
    """|u - ū| stays under 1.05·‖v0‖ e^{g'(ū) t} for a small bistable bump."""
    law = burgers("bistable")
    data = whole_line_data(make_shape("sech", amplitude=0.02), base=-1.0)
    sol = evolve_smooth(law, data, 5.0, n_curves=2049, x_span=(-20.0, 20.0))
    assert sol.alive
    for k, t in enumerate(sol.times):
        if 0.5 <= t <= 5.0:
            assert slice_sup(sol, k, -1.0) <= 1.05 * 0.02 * math.exp(-2.0 * t)


def test_frozen_coefficient_sup_bound() -> None:
    """f' ≡ 1, g = -u: sup|v(t)| ≤ e^{-t} sup|v0| at every stored time."""
    law = build_law("linear", "linear", {"speed": 1.0}, {"beta": 1.0})
    data = whole_line_data(make_shape("sech", amplitude=0.3))
    sol = evolve_smooth(law, data, 3.0, n_curves=401, x_span=(-10.0, 10.0), dt=0.01)
    sup0 = slice_sup(sol, 0, 0.0)
    assert sup0 == pytest.approx(0.3, rel=1e-3)
    for k, t in enumerate(sol.times):
        assert slice_sup(sol, k, 0.0) <= math.exp(-t) * sup0 * (1.0 + 1e-8)


def test_moving_frame_shifts_transport_speed() -> None:
    """The speed-1 solution at x is the speed-(1 - σ) solution at x - σt."""
    sigma = 0.75
    data = whole_line_data(make_shape("sech", amplitude=0.4))
    fans = [
        evolve_smooth(build_law("linear", "linear", {"speed": c}, {"beta": 1.0}), data, 1.0,
                      n_curves=401, x_span=(-10.0, 10.0), dt=0.01)
        for c in (1.0, 1.0 - sigma)
    ]
    xs = np.linspace(-5.0, 5.0, 53)
    still = fans[0].evaluate_many(1.0, xs)
    moving = fans[1].evaluate_many(1.0, xs - sigma)
    assert np.allclose(still, moving, rtol=0.0, atol=1e-10)


def test_negative_part_signs() -> None:
    """With sign +1 only decreasing parts count."""
    law = build_law("linear", "zero", {"speed": 1.0})
    sol = evolve_smooth(law, whole_line_data(make_shape("sech", amplitude=1.0)), 0.1,
                        n_curves=2001, x_span=(-10.0, 10.0))
    down = slice_negative_part(sol, 0, 1.0)
    assert down == pytest.approx(0.5, abs=1e-3)
    assert slice_negative_part(sol, 0, 1.0, hi=-1.0) == 0.0
    assert slice_negative_part(sol, 0, -1.0, lo=1.0) == 0.0
    assert slice_sup(sol, 0, 0.0, lo=50.0) == 0.0


def test_fan_argument_checks() -> None:
    data = whole_line_data(make_shape("sech", amplitude=0.1))
    with pytest.raises(DomainError):
        evolve_smooth(burgers(), data, 1.0, n_curves=4)
    with pytest.raises(DomainError):
        evolve_smooth(burgers(), data, 1.0, x_span=(1.0, -1.0))
    with pytest.raises(DomainError):
        evolve_smooth(burgers(), whole_line_data(make_shape("step_exp", amplitude=0.1)), 1.0)


def test_sampling_outside_fan() -> None:
    law = build_law("linear", "zero", {"speed": 1.0})
    sol = evolve_smooth(law, whole_line_data(make_shape("none")), 1.0, n_curves=33,
                        x_span=(-1.0, 1.0))
    assert sol.span(1.0) == pytest.approx((0.0, 2.0))
    with pytest.raises(ExtrapolationError):
        sample(sol, 1.0, -0.5)
    with pytest.raises(ExtrapolationError):
        sol.evaluate_many(1.0, np.array([0.5, 3.0]))
    with pytest.raises(ExtrapolationError):
        sol.slice_at(1.5)


def test_sample_interpolation_second_order() -> None:
    """Doubling the curves cuts the sampling error by at least 3; nodes are exact."""
    law = build_law("linear", "linear", {"speed": 1.0}, {"beta": 2.0})
    data = whole_line_data(make_shape("sine", amplitude=0.1))
    xs = np.linspace(-5.0, 5.0, 37) + 0.013
    exact = 0.1 * math.exp(-1.0) * np.sin(xs - 0.5)
    errors = []
    for n_curves in (201, 401):
        sol = evolve_smooth(law, data, 0.5, n_curves=n_curves, x_span=(-10.0, 10.0), dt=0.01)
        errors.append(float(np.max(np.abs(sol.evaluate_many(0.5, xs) - exact))))
    assert errors[0] <= 1e-3
    assert errors[1] <= errors[0] / 3.0
    u, w = sample(sol, 0.5, float(sol.x[-1][100]))
    assert u == pytest.approx(float(sol.u[-1][100]), abs=1e-12)
    assert w == pytest.approx(float(sol.w[-1][100]), abs=1e-12)
