"""Classical solutions by characteristics.

Along ẋ = f'(u) the solution obeys u̇ = g(u) and its slope w = ∂x u obeys
the Riccati equation ẇ = g'(u) w - f''(u) w².  A fan of curves seeded from
whole-line C¹ data is advanced with fixed-step RK4 until t_final or until
the gradient blows up (|w| above threshold, or two curves cross).

Slices are stored every few steps; between stored slices each curve is
interpolated in time by cubic Hermite using the exact time derivatives, and
in space by PCHIP for u and linearly for w.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator, pchip_interpolate
from typing_extensions import Protocol

from shockfit.constants import (
    BLOWUP_MAX_REFINE,
    BLOWUP_STEP_SLACK,
    BLOWUP_SUBSTEPS,
    BLOWUP_THRESHOLD,
    BLOWUP_TIME_TOL,
    DEFAULT_DT,
    DEFAULT_N_CURVES,
    MAX_STORED_SLICES,
    MIN_CURVES,
    SAMPLE_WINDOW,
)
from shockfit.model import DomainError, ScalarLaw

logger = logging.getLogger(__name__)

STATUS_ALIVE = "alive"
STATUS_BLOWN_UP = "blown_up"

Arrays = Tuple[np.ndarray, np.ndarray, np.ndarray]


class SmoothData(Protocol):
    """Whole-line C¹ initial data (ExtendedData or anything shaped like it)."""

    @property
    def smooth(self) -> bool: ...

    def values(self, x: np.ndarray) -> np.ndarray: ...

    def derivative(self, x: np.ndarray) -> np.ndarray: ...


class BlowUpError(RuntimeError):
    """Raised when a solution is queried past its gradient blow-up.

    bracket is the (t_lo, t_hi) interval known to contain the blow-up.
    """

    def __init__(
        self,
        message: str,
        t_blow: Optional[float] = None,
        bracket: Optional[Tuple[float, float]] = None,
    ) -> None:
        super().__init__(message)
        self.t_blow = t_blow
        self.bracket = bracket


class ExtrapolationError(ValueError):
    """Raised when a query falls outside the fan."""


class CharacteristicState:
    """One point (x, u, w = ∂x u) on a characteristic curve at time t.

    A blown-up state keeps the last finite (x, u), carries w = ±inf and the
    step [t_lo, t_hi] in which |w| passed the threshold.
    """

    __slots__ = ("x", "u", "w", "t", "blown_up", "bracket")

    def __init__(
        self,
        x: float,
        u: float,
        w: float,
        t: float = 0.0,
        blown_up: bool = False,
        bracket: Optional[Tuple[float, float]] = None,
    ) -> None:
        self.x = float(x)
        self.u = float(u)
        self.w = float(w)
        self.t = float(t)
        self.blown_up = blown_up
        self.bracket = bracket

    def __repr__(self) -> str:
        flag = ", blown_up in {}".format(self.bracket) if self.blown_up else ""
        return "CharacteristicState(t={}, x={}, u={}, w={}{})".format(
            self.t, self.x, self.u, self.w, flag,
        )


# ── Integrator ────────────────────────────────────────────────────────────────

def _rhs(law: ScalarLaw, u: np.ndarray, w: np.ndarray) -> Arrays:
    return law._df(u), law.source(u), law._dg(u) * w - law._d2f(u) * w * w


def _rk4(law: ScalarLaw, x: np.ndarray, u: np.ndarray, w: np.ndarray, h: float):
    """One classical RK4 step; also returns max |w| over all stages."""
    with np.errstate(over="ignore", invalid="ignore"):
        k1x, k1u, k1w = _rhs(law, u, w)
        u2, w2 = u + 0.5 * h * k1u, w + 0.5 * h * k1w
        k2x, k2u, k2w = _rhs(law, u2, w2)
        u3, w3 = u + 0.5 * h * k2u, w + 0.5 * h * k2w
        k3x, k3u, k3w = _rhs(law, u3, w3)
        u4, w4 = u + h * k3u, w + h * k3w
        k4x, k4u, k4w = _rhs(law, u4, w4)

        x_new = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        u_new = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        w_new = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        stage_max = np.nanmax(np.abs(np.concatenate([w2, w3, w4, w_new])), initial=0.0)
    return x_new, u_new, w_new, stage_max


def _flagged(x: np.ndarray, u: np.ndarray, w: np.ndarray, stage_max: float) -> bool:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        return True
    if stage_max > BLOWUP_THRESHOLD:
        return True
    return x.size > 1 and bool(np.any(np.diff(x) <= 0.0))


def advance_characteristic(
    law: ScalarLaw, state: CharacteristicState, dt: float,
) -> CharacteristicState:
    """One RK4 step of the (x, u, w) system for a single curve.

    A step whose stages pass the |w| threshold returns a
    blown_up state bracketed by the step; a non-finite stage raises
    BlowUpError with the same bracket.
    """
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    if state.blown_up:
        raise BlowUpError("state already blew up in {}".format(state.bracket),
                          state.bracket[1] if state.bracket else None, state.bracket)
    x, u, w, stage_max = _rk4(
        law, np.array([state.x]), np.array([state.u]), np.array([state.w]), dt,
    )
    bracket = (state.t, state.t + dt)
    if not (np.isfinite(x[0]) and np.isfinite(u[0]) and np.isfinite(w[0])
            and np.isfinite(stage_max)):
        raise BlowUpError(
            "non-finite stage in [{}, {}]".format(*bracket), bracket[1], bracket,
        )
    if _flagged(x, u, w, stage_max):
        return CharacteristicState(
            state.x, state.u, math.copysign(math.inf, state.w), state.t, True, bracket,
        )
    return CharacteristicState(x[0], u[0], w[0], state.t + dt)


def time_grid(t_final: float, dt: float) -> Tuple[int, float]:
    """Number of steps and the step that lands exactly on t_final."""
    if not (t_final > 0.0 and dt > 0.0):
        raise DomainError("t_final and dt must be positive")
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    return n_steps, t_final / n_steps


def toy_blowup_time(alpha: float, beta: float, w0: float) -> Optional[float]:
    """Blow-up time of ẇ = -βw - αw² from w0, or None if the slope stays bounded.

    Bounded exactly when α·w0 ≥ -β.
    """
    if beta < 0.0:
        raise DomainError("beta must be >= 0")
    z0 = alpha * w0
    if z0 >= -beta:
        return None
    if beta == 0.0:
        return -1.0 / z0
    return math.log(z0 / (z0 + beta)) / beta


# ── Fans ──────────────────────────────────────────────────────────────────────

class SmoothSolution:
    """Stored slices of a characteristic fan.

    x, u, w have shape (n_slices, n_curves); slice k is at times[k].  When
    status is blown_up, the last slice is the last step strictly before
    blow_bracket, the (t_lo, t_hi) interval holding the blow-up; t_blow is
    its midpoint.
    """

    def __init__(
        self,
        law: ScalarLaw,
        times: np.ndarray,
        x: np.ndarray,
        u: np.ndarray,
        w: np.ndarray,
        status: str = STATUS_ALIVE,
        t_blow: Optional[float] = None,
        x_blow: Optional[float] = None,
        step: float = DEFAULT_DT,
        blow_bracket: Optional[Tuple[float, float]] = None,
    ) -> None:
        self.law = law
        self.times = times
        self.x = x
        self.u = u
        self.w = w
        self.status = status
        self.t_blow = t_blow
        self.x_blow = x_blow
        self.step = step
        self.blow_bracket = blow_bracket
        self.max_gap = np.max(np.diff(x, axis=1), axis=1)

    @property
    def alive(self) -> bool:
        return self.status == STATUS_ALIVE

    @property
    def horizon(self) -> float:
        """Last time at which the fan can be sampled."""
        return float(self.times[-1])

    @property
    def n_curves(self) -> int:
        return int(self.x.shape[1])

    def _locate(self, t: float) -> int:
        eps = 1e-12 * max(1.0, abs(t))
        if t < self.times[0] - eps:
            raise ExtrapolationError("t={} precedes the fan start {}".format(t, self.times[0]))
        if t > self.times[-1] + eps:
            if self.status == STATUS_BLOWN_UP:
                raise BlowUpError(
                    "t={} is past the blow-up at t={}".format(t, self.t_blow),
                    self.t_blow, self.blow_bracket,
                )
            raise ExtrapolationError("t={} is past the fan end {}".format(t, self.times[-1]))
        if len(self.times) == 1:
            return 0
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), len(self.times) - 2)

    def _interpolate(self, k: int, t: float, sl: slice) -> Arrays:
        if len(self.times) == 1:
            return self.x[0, sl], self.u[0, sl], self.w[0, sl]
        t0, t1 = self.times[k], self.times[k + 1]
        span = t1 - t0
        s = min(max((t - t0) / span, 0.0), 1.0)
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        x0, u0, w0 = self.x[k, sl], self.u[k, sl], self.w[k, sl]
        x1, u1, w1 = self.x[k + 1, sl], self.u[k + 1, sl], self.w[k + 1, sl]
        dx0, du0, dw0 = _rhs(self.law, u0, w0)
        dx1, du1, dw1 = _rhs(self.law, u1, w1)
        return (
            h00 * x0 + h10 * span * dx0 + h01 * x1 + h11 * span * dx1,
            h00 * u0 + h10 * span * du0 + h01 * u1 + h11 * span * du1,
            h00 * w0 + h10 * span * dw0 + h01 * w1 + h11 * span * dw1,
        )

    def slice_at(self, t: float) -> Arrays:
        """All curves (x, u, w) at time t."""
        return self._interpolate(self._locate(t), t, slice(None))

    def span(self, t: float) -> Tuple[float, float]:
        x, _, _ = self.slice_at(t)
        return float(x[0]), float(x[-1])

    def evaluate_many(self, t: float, xs: np.ndarray) -> np.ndarray:
        return sample_many(self, t, xs)[0]

    def shock_positions(self, t: float) -> Tuple[float, ...]:
        return ()

    def __repr__(self) -> str:
        return "SmoothSolution({} curves, t=[{}, {}], {})".format(
            self.n_curves, self.times[0], self.times[-1], self.status,
        )


Blowup = Tuple[float, float, float]


def _advance(
    law: ScalarLaw, x: np.ndarray, u: np.ndarray, w: np.ndarray, step: float,
) -> Tuple[bool, np.ndarray, np.ndarray, np.ndarray]:
    """BLOWUP_SUBSTEPS RK4 sub-steps; stops at the last unflagged state."""
    sub = step / BLOWUP_SUBSTEPS
    for _ in range(BLOWUP_SUBSTEPS):
        xn, un, wn, stage_max = _rk4(law, x, u, w, sub)
        if _flagged(xn, un, wn, stage_max):
            return True, x, u, w
        x, u, w = xn, un, wn
    return False, x, u, w


def _time_to_blowup(law: ScalarLaw, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Per-curve time until z = 1/w reaches zero, one Newton step on ż = f''(u) - g'(u) z.

    +inf where z is not heading to zero.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = 1.0 / w
        tau = -z / (law._d2f(u) - law._dg(u) * z)
    return np.where(np.isfinite(tau) & (tau > 0.0), tau, np.inf)


def _bracket_blowup(
    law: ScalarLaw, x: np.ndarray, u: np.ndarray, w: np.ndarray, t: float, h: float,
) -> Blowup:
    """Bisect the flagged step [t, t+h] down to BLOWUP_TIME_TOL.

    Returns (t_lo, t_hi, x_blow).
    """
    lo, hi = 0.0, h
    while hi - lo > BLOWUP_TIME_TOL:
        mid = 0.5 * (lo + hi)
        if _advance(law, x, u, w, mid)[0]:
            hi = mid
        else:
            lo = mid
    _, x_lo, _, w_lo = _advance(law, x, u, w, lo) if lo > 0.0 else (False, x, u, w)
    i = int(np.argmax(np.abs(w_lo)))
    return t + lo, t + hi, float(x_lo[i])


def _refine_blowup(
    law: ScalarLaw, x: np.ndarray, u: np.ndarray, w: np.ndarray, t: float, h: float,
) -> Optional[Blowup]:
    """Follow the predicted zero of 1/w from t by half-steps.

    Returns (t_lo, t_hi, x_blow) with the predicted blow-up at the bracket
    midpoint, or None when the prediction recedes past 2h (no blow-up).
    """
    t_lo = t
    for _ in range(BLOWUP_MAX_REFINE):
        tau = _time_to_blowup(law, u, w)
        i = int(np.argmin(tau))
        if tau[i] > 2.0 * h:
            return None
        if tau[i] <= BLOWUP_TIME_TOL:
            return t_lo, t_lo + 2.0 * tau[i], float(x[i])
        step = 0.5 * tau[i]
        flagged, xs, us, ws = _advance(law, x, u, w, step)
        if flagged:
            return _bracket_blowup(law, x, u, w, t_lo, step)
        x, u, w, t_lo = xs, us, ws, t_lo + step
    i = int(np.argmin(_time_to_blowup(law, u, w)))
    return t_lo, t_lo + 2.0 * BLOWUP_TIME_TOL, float(x[i])


def evolve_smooth(
    law: ScalarLaw,
    data: SmoothData,
    t_final: float,
    n_curves: int = DEFAULT_N_CURVES,
    x_span: Tuple[float, float] = (-10.0, 10.0),
    dt: float = DEFAULT_DT,
    store_every: Optional[int] = None,
) -> SmoothSolution:
    """Seed n_curves characteristics uniformly over x_span and advance them.

    Before each step the zero of 1/w is predicted along every curve; a
    prediction inside the step (with BLOWUP_STEP_SLACK) is refined to a
    bracket, so the last stored slice lies strictly before the blow-up.
    Threshold and crossing flags on the step itself are bisected.
    """
    if n_curves < MIN_CURVES:
        raise DomainError("need at least {} curves, got {}".format(MIN_CURVES, n_curves))
    lo, hi = float(x_span[0]), float(x_span[1])
    if not lo < hi:
        raise DomainError("x_span must be increasing")
    if not data.smooth:
        raise DomainError("characteristics need C¹ data")
    n_steps, h = time_grid(t_final, dt)
    stride = store_every or max(1, int(math.ceil(n_steps / MAX_STORED_SLICES)))

    x = np.linspace(lo, hi, n_curves)
    u = np.asarray(data.values(x), dtype=float)
    w = np.asarray(data.derivative(x), dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise DomainError("initial data is not finite on x_span")

    times = [0.0]
    xs, us, ws = [x], [u], [w]
    blow: Optional[Blowup] = None
    for n in range(n_steps):
        t_n = n * h
        if np.min(_time_to_blowup(law, u, w)) <= (1.0 + BLOWUP_STEP_SLACK) * h:
            blow = _refine_blowup(law, x, u, w, t_n, h)
        if blow is None:
            x_new, u_new, w_new, stage_max = _rk4(law, x, u, w, h)
            if _flagged(x_new, u_new, w_new, stage_max):
                blow = _bracket_blowup(law, x, u, w, t_n, h)
        if blow is not None:
            if times[-1] != t_n:
                times.append(t_n)
                xs.append(x)
                us.append(u)
                ws.append(w)
            logger.info("Gradient blow-up in [%.6f, %.6f] near x=%.6f", *blow)
            break
        x, u, w = x_new, u_new, w_new
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            times.append(t_final if n + 1 == n_steps else (n + 1) * h)
            xs.append(x)
            us.append(u)
            ws.append(w)

    if blow is None:
        return SmoothSolution(
            law, np.array(times), np.vstack(xs), np.vstack(us), np.vstack(ws), step=h,
        )
    t_lo, t_hi, x_blow = blow
    return SmoothSolution(
        law, np.array(times), np.vstack(xs), np.vstack(us), np.vstack(ws),
        STATUS_BLOWN_UP, 0.5 * (t_lo + t_hi), x_blow, h, (t_lo, t_hi),
    )


# ── Sampling ──────────────────────────────────────────────────────────────────

def sample(sol: SmoothSolution, t: float, x: float) -> Tuple[float, float]:
    """(u, w) at (t, x) from the bracketing curves."""
    k = sol._locate(t)
    n = sol.n_curves
    last = min(k + 1, len(sol.times) - 1)
    i0 = int(np.searchsorted(sol.x[k], x))
    i1 = int(np.searchsorted(sol.x[last], x))
    pad = SAMPLE_WINDOW + 1
    lo = max(min(i0, i1) - pad, 0)
    hi = min(max(i0, i1) + pad, n)
    while True:
        xw, uw, ww = sol._interpolate(k, t, slice(lo, hi))
        widen_lo = x < xw[0] and lo > 0
        widen_hi = x > xw[-1] and hi < n
        if not (widen_lo or widen_hi):
            break
        if widen_lo:
            lo = max(lo - 2 * pad, 0)
        if widen_hi:
            hi = min(hi + 2 * pad, n)
    if x < xw[0] or x > xw[-1]:
        raise ExtrapolationError(
            "x={} outside the fan [{}, {}] at t={}".format(x, xw[0], xw[-1], t),
        )
    u = pchip_interpolate(xw, uw, x)
    w = np.interp(x, xw, ww)
    return float(u), float(w)


def sample_many(
    sol: SmoothSolution, t: float, xs: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized sample over a whole slice."""
    x, u, w = sol.slice_at(t)
    xs = np.asarray(xs, dtype=float)
    if xs.size and (xs.min() < x[0] or xs.max() > x[-1]):
        raise ExtrapolationError(
            "points [{}, {}] outside the fan [{}, {}] at t={}".format(
                xs.min(), xs.max(), x[0], x[-1], t,
            ),
        )
    return PchipInterpolator(x, u)(xs), np.interp(xs, x, w)


def slice_sup(
    sol: SmoothSolution, k: int, base: float, lo: float = -math.inf, hi: float = math.inf,
) -> float:
    """max |u - base| over stored slice k on [lo, hi], nodes plus midpoints."""
    x, u = sol.x[k], sol.u[k]
    mask = (x >= lo) & (x <= hi)
    if not np.any(mask):
        return 0.0
    best = float(np.max(np.abs(u[mask] - base)))
    pairs = mask[:-1] & mask[1:]
    if np.any(pairs):
        mids = 0.5 * (x[:-1] + x[1:])[pairs]
        best = max(best, float(np.max(np.abs(PchipInterpolator(x, u)(mids) - base))))
    return best


def slice_negative_part(
    sol: SmoothSolution, k: int, sign: float, lo: float = -math.inf, hi: float = math.inf,
) -> float:
    """max of (sign·w)₋ over stored slice k on [lo, hi] (w is piecewise linear)."""
    x, w = sol.x[k], sol.w[k]
    mask = (x >= lo) & (x <= hi)
    if not np.any(mask):
        return 0.0
    return float(np.max(np.maximum(-sign * w[mask], 0.0)))
