"""Rankine–Hugoniot shock tracking, gluing and the two-shock merge.

A shock position ψ obeys ψ' = s_f(u_l(t, ψ), u_r(t, ψ)), where u_l and u_r
are sampled from the smooth solutions on either side.  The ODE is integrated
with RK4 on the fans' own time grid; every node records the one-sided
states and both Lax margins.  A node where a margin reaches zero (or the
jump changes sign) truncates the path: the last valid node becomes
valid_until and nothing is repaired.

GluedSolution patches the smooth solutions together along the paths.  At
most two shocks are handled; two paths may merge once into a final path.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from shockfit.characteristics import (
    BlowUpError,
    ExtrapolationError,
    SmoothSolution,
    sample,
    sample_many,
    time_grid,
)
from shockfit.constants import (
    DEFAULT_DT,
    MERGE_TIME_TOL_FACTOR,
    PHASE_RATE_MISMATCH,
    VALUE_FLOOR,
)
from shockfit.fitting import FitError, FitResult, fit_series
from shockfit.model import DomainError, ScalarLaw, check_lax, slope

logger = logging.getLogger(__name__)

Evaluation = Union[float, Tuple[float, float]]


class SpanError(ValueError):
    """Raised when a path leaves the span of one of its fans."""

    def __init__(self, message: str, t: float) -> None:
        super().__init__(message)
        self.t = t


class ValidityError(ValueError):
    """Raised when a path or glued solution is used outside its valid window."""


class PhaseFitError(ValueError):
    """Raised when ψ' - σ does not decay and no phase can be assigned."""


def _eps(t: float) -> float:
    return 1e-12 * max(1.0, abs(t))


# ── Paths ─────────────────────────────────────────────────────────────────────

class ShockPath:
    """Recorded nodes of one shock curve.

    valid_until is None when the path ran to its intended end (t_final, or
    the merge time for paths that merge); otherwise it is the last node at
    which the Lax condition still held.
    """

    def __init__(
        self,
        times: np.ndarray,
        psi: np.ndarray,
        psi_prime: np.ndarray,
        u_left: np.ndarray,
        u_right: np.ndarray,
        lax_left: np.ndarray,
        lax_right: np.ndarray,
        valid_until: Optional[float] = None,
        label: str = "shock",
    ) -> None:
        self.times = times
        self.psi = psi
        self.psi_prime = psi_prime
        self.u_left = u_left
        self.u_right = u_right
        self.lax_left = lax_left
        self.lax_right = lax_right
        self.valid_until = valid_until
        self.label = label

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def truncated(self) -> bool:
        return self.valid_until is not None

    @property
    def lax_margins(self) -> np.ndarray:
        return np.column_stack([self.lax_left, self.lax_right])

    @property
    def min_lax_margin(self) -> float:
        return float(min(np.min(self.lax_left), np.min(self.lax_right)))

    def _segment(self, t: float) -> int:
        if t < self.times[0] - _eps(t) or t > self.times[-1] + _eps(t):
            raise ValidityError("{} path is defined on [{}, {}], queried at t={}".format(
                self.label, self.start, self.end, t,
            ))
        if len(self.times) == 1:
            return 0
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), len(self.times) - 2)

    def position(self, t: float) -> float:
        """ψ(t), cubic Hermite between nodes."""
        k = self._segment(t)
        if len(self.times) == 1:
            return float(self.psi[0])
        t0, t1 = self.times[k], self.times[k + 1]
        h = t1 - t0
        s = min(max((t - t0) / h, 0.0), 1.0)
        return float(
            (1.0 + 2.0 * s) * (1.0 - s) ** 2 * self.psi[k]
            + s * (1.0 - s) ** 2 * h * self.psi_prime[k]
            + s * s * (3.0 - 2.0 * s) * self.psi[k + 1]
            + s * s * (s - 1.0) * h * self.psi_prime[k + 1]
        )

    def speed(self, t: float) -> float:
        self._segment(t)
        return float(np.interp(t, self.times, self.psi_prime))

    def rh_residuals(self, law: ScalarLaw) -> np.ndarray:
        """|ψ'(u_r - u_l) - (f(u_r) - f(u_l))| at every node."""
        jump = self.u_right - self.u_left
        return np.abs(self.psi_prime * jump - (law.f(self.u_right) - law.f(self.u_left)))

    def jump_sign_constant(self) -> bool:
        signs = np.sign(self.u_right - self.u_left)
        return bool(np.all(signs == signs[0]) and signs[0] != 0.0)

    def __len__(self) -> int:
        return len(self.times)

    def __repr__(self) -> str:
        tail = ", valid_until={}".format(self.valid_until) if self.truncated else ""
        return "ShockPath({}, {} nodes, t=[{}, {}]{})".format(
            self.label, len(self.times), self.start, self.end, tail,
        )


def _one_sided(sol: SmoothSolution, t: float, x: float, name: str) -> float:
    try:
        return sample(sol, t, x)[0]
    except ExtrapolationError as exc:
        raise SpanError(
            "{} fan does not cover x={:.6g} at t={:.6g}".format(name, x, t), t,
        ) from exc


class _PathBuilder:
    """Accumulates nodes of one path between a lower and an upper fan."""

    def __init__(
        self, law: ScalarLaw, lower: SmoothSolution, upper: SmoothSolution, label: str,
    ) -> None:
        self.law = law
        self.lower = lower
        self.upper = upper
        self.label = label
        self.rows = []  # type: List[Tuple[float, ...]]
        self.sign = 0.0
        self.valid_until = None  # type: Optional[float]

    @property
    def stopped(self) -> bool:
        return self.valid_until is not None

    def states(self, t: float, psi: float) -> Tuple[float, float, float]:
        u_l = _one_sided(self.lower, t, psi, self.label + " lower")
        u_r = _one_sided(self.upper, t, psi, self.label + " upper")
        return u_l, u_r, float(slope(self.law, u_l, u_r))

    def speed(self, t: float, psi: float) -> float:
        return self.states(t, psi)[2]

    def record(self, t: float, psi: float) -> Optional[float]:
        """Append the node at (t, psi); return its speed, or None if it is invalid."""
        u_l, u_r, s = self.states(t, psi)
        ok, left_margin, right_margin = check_lax(self.law, u_l, u_r, s)
        sign = math.copysign(1.0, u_r - u_l) if u_r != u_l else 0.0
        if not self.rows:
            self.sign = sign
        if not ok or sign == 0.0 or sign != self.sign:
            if not self.rows:
                raise ValidityError(
                    "{} path starts outside the Lax regime at t={} (margins {:.3g}, {:.3g})".format(
                        self.label, t, left_margin, right_margin,
                    )
                )
            self.valid_until = self.rows[-1][0]
            logger.warning(
                "%s path truncated at t=%.6g: Lax margins %.3g, %.3g",
                self.label, t, left_margin, right_margin,
            )
            return None
        self.rows.append((t, psi, s, u_l, u_r, left_margin, right_margin))
        return s

    def build(self) -> ShockPath:
        data = np.array(self.rows, dtype=float)
        return ShockPath(
            data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4], data[:, 5], data[:, 6],
            self.valid_until, self.label,
        )


def _rk4_step(builder: _PathBuilder, t: float, psi: float, h: float, k1: float) -> float:
    k2 = builder.speed(t + 0.5 * h, psi + 0.5 * h * k1)
    k3 = builder.speed(t + 0.5 * h, psi + 0.5 * h * k2)
    k4 = builder.speed(t + h, psi + h * k3)
    return psi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _require_alive(sols: Sequence[Tuple[str, SmoothSolution]], t_final: float) -> None:
    for name, sol in sols:
        if sol.horizon < t_final - _eps(t_final):
            if not sol.alive:
                raise BlowUpError(
                    "{} fan blew up at t={} before t_final={}".format(name, sol.t_blow, t_final),
                    sol.t_blow, sol.blow_bracket,
                )
            raise ValidityError("{} fan ends at t={} before t_final={}".format(
                name, sol.horizon, t_final,
            ))


def track_shock(
    law: ScalarLaw,
    left: SmoothSolution,
    right: SmoothSolution,
    psi0: float,
    t_final: float,
    dt: float = DEFAULT_DT,
) -> ShockPath:
    """Integrate ψ' = s_f(u_l, u_r) from ψ(0) = psi0 to t_final.

    Uses the flux of `law` only, so per-side sources do not matter here.
    """
    _require_alive((("left", left), ("right", right)), t_final)
    n_steps, h = time_grid(t_final, dt)
    builder = _PathBuilder(law, left, right, "shock")
    psi = float(psi0)
    k1 = builder.record(0.0, psi)
    for n in range(n_steps):
        t = n * h
        psi = _rk4_step(builder, t, psi, h, k1)
        t_next = t_final if n + 1 == n_steps else (n + 1) * h
        k1 = builder.record(t_next, psi)
        if k1 is None:
            break
    path = builder.build()
    logger.debug("Tracked %r", path)
    return path


# ── Gluing ────────────────────────────────────────────────────────────────────

class MergeEvent:
    """Time and place where two shocks meet, with the speed jump there."""

    def __init__(
        self, t_star: float, x_star: float, speed_before: float, speed_after: float,
    ) -> None:
        self.t_star = t_star
        self.x_star = x_star
        self.speed_before = speed_before
        self.speed_after = speed_after

    @property
    def speed_jump(self) -> float:
        return self.speed_after - self.speed_before

    def __repr__(self) -> str:
        return "MergeEvent(t*={:.9g}, x*={:.9g}, jump={:.6g})".format(
            self.t_star, self.x_star, self.speed_jump,
        )


class GluedSolution:
    """Entropy solution assembled from smooth pieces and shock paths.

    With one path, x < ψ reads the left fan and x > ψ the right fan.  With
    two paths (ψ_l < ψ_r) the middle fan fills the gap.  After a merge only
    the final path remains and the middle fan is no longer read.
    """

    def __init__(
        self,
        left: SmoothSolution,
        right: SmoothSolution,
        paths: Sequence[ShockPath],
        middle: Optional[SmoothSolution] = None,
        merge: Optional[MergeEvent] = None,
    ) -> None:
        if not 1 <= len(paths) <= 3:
            raise DomainError("a glued solution carries one or two shocks")
        if len(paths) > 1 and middle is None:
            raise DomainError("two shocks need a middle solution")
        if merge is not None and len(paths) != 3:
            raise DomainError("a merge needs the two merging paths and the final path")
        self.left = left
        self.right = right
        self.middle = middle
        self.paths = tuple(paths)
        self.merge = merge

    @property
    def horizon(self) -> float:
        """Last time at which every active path is valid."""
        if self.merge is not None:
            return self.paths[2].end
        return min(p.end for p in self.paths)

    @property
    def valid_until(self) -> Optional[float]:
        truncated = [p.valid_until for p in self.paths if p.valid_until is not None]
        return min(truncated) if truncated else None

    def active_paths(self, t: float) -> Tuple[ShockPath, ...]:
        if t > self.horizon + _eps(t) or t < -_eps(t):
            raise ValidityError("glued solution is valid on [0, {}], queried at t={}".format(
                self.horizon, t,
            ))
        if self.merge is None:
            return self.paths
        if t < self.merge.t_star:
            return self.paths[:2]
        return self.paths[2:]

    def shock_positions(self, t: float) -> Tuple[float, ...]:
        return tuple(p.position(t) for p in self.active_paths(t))

    def _pieces(self, t: float) -> List[Tuple[str, SmoothSolution]]:
        if len(self.active_paths(t)) == 2:
            return [("left", self.left), ("middle", self.middle), ("right", self.right)]
        return [("left", self.left), ("right", self.right)]

    def evaluate(self, t: float, x: float) -> Evaluation:
        """u(t, x); at a shock position the pair (u_l, u_r)."""
        positions = self.shock_positions(t)
        pieces = self._pieces(t)
        for i, p in enumerate(positions):
            if x == p:
                return (
                    _one_sided(pieces[i][1], t, x, pieces[i][0]),
                    _one_sided(pieces[i + 1][1], t, x, pieces[i + 1][0]),
                )
        i = int(np.searchsorted(positions, x))
        name, sol = pieces[i]
        return _one_sided(sol, t, x, name)

    def evaluate_many(self, t: float, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluate; points on a shock take the right-hand state."""
        xs = np.asarray(xs, dtype=float)
        positions = np.asarray(self.shock_positions(t))
        pieces = self._pieces(t)
        index = np.searchsorted(positions, xs, side="right")
        out = np.empty_like(xs)
        for i, (name, sol) in enumerate(pieces):
            mask = index == i
            if not np.any(mask):
                continue
            try:
                out[mask] = sample_many(sol, t, xs[mask])[0]
            except ExtrapolationError as exc:
                raise SpanError("{} fan: {}".format(name, exc), t) from exc
        return out

    def span(self, t: float) -> Tuple[float, float]:
        return self.left.span(t)[0], self.right.span(t)[1]

    def __repr__(self) -> str:
        return "GluedSolution({} paths, horizon={}, merge={!r})".format(
            len(self.paths), self.horizon, self.merge,
        )


def glue(left: SmoothSolution, right: SmoothSolution, path: ShockPath) -> GluedSolution:
    return GluedSolution(left, right, (path,))


# ── Asymptotic phase ──────────────────────────────────────────────────────────

class PhaseResult:
    """ψ∞ in the frame moving with σ, with the tail estimate beyond the last node."""

    def __init__(
        self,
        psi_infty: float,
        tail_bound: float,
        truncation_time: float,
        fit: Optional[FitResult] = None,
    ) -> None:
        self.psi_infty = psi_infty
        self.tail_bound = tail_bound
        self.truncation_time = truncation_time
        self.fit = fit

    def __repr__(self) -> str:
        return "PhaseResult(psi_infty={:.12g}, tail_bound={:.3g}, T={})".format(
            self.psi_infty, self.tail_bound, self.truncation_time,
        )


def asymptotic_phase(
    path: ShockPath,
    sigma: float,
    rate_hint: float,
    floor: float = VALUE_FLOOR,
) -> PhaseResult:
    """ψ∞ = ψ0 + ∫(ψ' - σ) over the path plus an exponential tail.

    The tail beyond T is (ψ'(T) - σ)/|rate_hint|.  When |ψ' - σ| sits at the
    floor on the second half of the path the tail is zero; otherwise the
    decay of |ψ' - σ| on [T/2, T] is fitted and must be negative.
    """
    if not rate_hint < 0.0:
        raise DomainError("rate_hint must be negative, got {}".format(rate_hint))
    if len(path) < 2:
        raise PhaseFitError("path has a single node")
    t = path.times
    d = path.psi_prime - sigma
    integral = float(trapezoid(d, t))
    big_t = float(t[-1])
    late = t >= 0.5 * (t[0] + big_t)

    fit = None
    tail = 0.0
    if np.max(np.abs(d[late])) > floor:
        window = (0.5 * (t[0] + big_t), big_t)
        try:
            fit = fit_series(t, np.maximum(np.abs(d), floor), window, floor=0.0)
        except FitError as exc:
            raise PhaseFitError("cannot fit the decay of |psi' - sigma|: {}".format(exc)) from exc
        if fit.rate >= 0.0:
            raise PhaseFitError("|psi' - sigma| does not decay (rate {:.4g})".format(fit.rate))
        if abs(fit.rate - rate_hint) > PHASE_RATE_MISMATCH:
            logger.warning(
                "Phase speed decays at rate %.4g, expected about %.4g", fit.rate, rate_hint,
            )
        tail = float(d[-1]) / abs(rate_hint)

    psi_infty = float(path.psi[0]) + integral + tail
    return PhaseResult(psi_infty, abs(tail), big_t, fit)


def phase_deviation(path: ShockPath, sigma: float, psi_infty: float) -> np.ndarray:
    """|ψ(t) - σt - ψ∞| at the path nodes."""
    return np.abs(path.psi - sigma * path.times - psi_infty)


# ── Two shocks ────────────────────────────────────────────────────────────────

def _bisect_merge(
    lower: _PathBuilder,
    upper: _PathBuilder,
    t: float,
    psi_l: float,
    psi_r: float,
    k_l: float,
    k_r: float,
    h: float,
    tol: float,
) -> Tuple[float, float, float]:
    """Shrink the step in which ψ_r - ψ_l changes sign; return (t*, ψ_l, ψ_r)."""
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gap = _rk4_step(upper, t, psi_r, mid, k_r) - _rk4_step(lower, t, psi_l, mid, k_l)
        if gap <= 0.0:
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    return t + s, _rk4_step(lower, t, psi_l, s, k_l), _rk4_step(upper, t, psi_r, s, k_r)


def two_shock_evolution(
    law: ScalarLaw,
    left: SmoothSolution,
    middle: SmoothSolution,
    right: SmoothSolution,
    psi_s0: float,
    psi0: float,
    t_final: float,
    dt: float = DEFAULT_DT,
) -> GluedSolution:
    """Track ψ_l (left/middle) and ψ_r (middle/right) until they meet.

    The first step in which ψ_r - ψ_l ≤ 0 is bisected down to dt·1e-3 and
    t* is the midpoint of the final bracket.  The merged path starts at
    (t*, ψ_r(t*)) between the left and right fans and continues to t_final.
    Without a crossing the two paths are returned and merge is None.
    """
    if not psi_s0 < psi0:
        raise DomainError("psi_s0 must lie left of psi0")
    _require_alive((("left", left), ("middle", middle), ("right", right)), t_final)
    n_steps, h = time_grid(t_final, dt)
    tol = MERGE_TIME_TOL_FACTOR * dt

    lower = _PathBuilder(law, left, middle, "psi_l")
    upper = _PathBuilder(law, middle, right, "psi_r")
    psi_l, psi_r = float(psi_s0), float(psi0)
    k_l = lower.record(0.0, psi_l)
    k_r = upper.record(0.0, psi_r)

    merge_at = None  # type: Optional[Tuple[int, float, float]]
    for n in range(n_steps):
        t = n * h
        new_l = _rk4_step(lower, t, psi_l, h, k_l)
        new_r = _rk4_step(upper, t, psi_r, h, k_r)
        if new_r - new_l <= 0.0:
            t_star, psi_l, psi_r = _bisect_merge(lower, upper, t, psi_l, psi_r, k_l, k_r, h, tol)
            lower.record(t_star, psi_l)
            upper.record(t_star, psi_r)
            merge_at = (n, t_star, psi_r)
            break
        psi_l, psi_r = new_l, new_r
        t_next = t_final if n + 1 == n_steps else (n + 1) * h
        k_l = lower.record(t_next, psi_l)
        k_r = upper.record(t_next, psi_r)
        if k_l is None or k_r is None:
            break

    path_l, path_r = lower.build(), upper.build()
    if merge_at is None:
        logger.info("No merge before t=%.6g", min(path_l.end, path_r.end))
        return GluedSolution(left, right, (path_l, path_r), middle=middle)

    n, t_star, x_star = merge_at
    final = _PathBuilder(law, left, right, "psi_f")
    k_f = final.record(t_star, x_star)
    psi_f = x_star
    if k_f is not None:
        t_next = t_final if n + 1 == n_steps else (n + 1) * h
        if t_next - t_star > _eps(t_star):
            psi_f = _rk4_step(final, t_star, psi_f, t_next - t_star, k_f)
            k_f = final.record(t_next, psi_f)
        for m in range(n + 1, n_steps):
            if k_f is None:
                break
            t = m * h
            psi_f = _rk4_step(final, t, psi_f, h, k_f)
            k_f = final.record(t_final if m + 1 == n_steps else (m + 1) * h, psi_f)

    path_f = final.build()
    event = MergeEvent(t_star, x_star, float(path_r.psi_prime[-1]), float(path_f.psi_prime[0]))
    logger.info("Shocks merge at t*=%.9g, x*=%.9g", t_star, x_star)
    return GluedSolution(left, right, (path_l, path_r, path_f), middle=middle, merge=event)
