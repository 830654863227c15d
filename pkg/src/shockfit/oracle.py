"""Godunov finite-volume reference solver.

Cell averages are advanced with Strang splitting: half a source step (RK4
per cell), one Godunov transport step, half a source step.  The Godunov
flux is the exact Riemann flux of a scalar law: the minimum of f over
[ul, ur] when ul ≤ ur and the maximum over [ur, ul] otherwise, taken over
the endpoints and the critical points of f inside the interval.
Boundaries are outflow (copied ghost cells).
"""

from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from typing_extensions import Literal

from shockfit.constants import (
    CFL_MAX,
    DEFAULT_CFL,
    LOCUS_MIN_JUMP,
    MERGE_CELLS,
    MERGE_FIT_MIN_CELLS,
    MERGE_FIT_SAMPLES,
)
from shockfit.model import ScalarLaw

logger = logging.getLogger(__name__)

Norm = Literal["L1", "Linf"]
StepCallback = Callable[[float, np.ndarray], bool]


class InstabilityError(RuntimeError):
    """Raised when a cell average stops being finite."""


class CflError(ValueError):
    """Raised for a CFL number outside (0, CFL_MAX]."""


class WindowMismatchError(ValueError):
    """Raised when a comparison window is not covered by both solutions."""


# ── Flux ──────────────────────────────────────────────────────────────────────

def godunov_flux(law: ScalarLaw, ul, ur):
    """Exact Riemann flux at one or many interfaces."""
    ul_arr = np.asarray(ul, dtype=float)
    ur_arr = np.asarray(ur, dtype=float)
    lo = np.minimum(ul_arr, ur_arr)
    hi = np.maximum(ul_arr, ur_arr)
    candidates = [law.flux(ul_arr), law.flux(ur_arr)]
    for c in law.flux_critical_points:
        candidates.append(law.flux(np.clip(c, lo, hi)))
    stacked = np.stack(np.broadcast_arrays(*candidates))
    out = np.where(ul_arr <= ur_arr, stacked.min(axis=0), stacked.max(axis=0))
    if np.ndim(ul) == 0 and np.ndim(ur) == 0:
        return float(out)
    return out


# ── State ─────────────────────────────────────────────────────────────────────

class FvState:
    """Cell averages on a uniform grid starting at x_left."""

    def __init__(self, dx: float, x_left: float, cells: np.ndarray, t: float = 0.0) -> None:
        if not dx > 0.0:
            raise ValueError("dx must be positive")
        self.dx = float(dx)
        self.x_left = float(x_left)
        self.cells = np.asarray(cells, dtype=float)
        self.t = float(t)

    @property
    def n_cells(self) -> int:
        return int(self.cells.size)

    @property
    def x_right(self) -> float:
        return self.x_left + self.n_cells * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.x_left + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        """Interior interfaces x_{i+1/2}, i = 0 .. n-2."""
        return self.x_left + np.arange(1, self.n_cells) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.cells) * self.dx)

    def copy(self) -> "FvState":
        return FvState(self.dx, self.x_left, self.cells.copy(), self.t)

    def __repr__(self) -> str:
        return "FvState({} cells, dx={}, [{}, {}], t={})".format(
            self.n_cells, self.dx, self.x_left, self.x_right, self.t,
        )


def initial_state(
    data: Callable[[np.ndarray], np.ndarray],
    x_left: float,
    x_right: float,
    dx: float,
) -> FvState:
    """Cell averages of data by three-point Gauss–Legendre per cell."""
    n = int(round((x_right - x_left) / dx))
    if n < 3:
        raise ValueError("need at least three cells")
    nodes, weights = leggauss(3)
    centers = x_left + (np.arange(n) + 0.5) * dx
    points = centers[:, None] + 0.5 * dx * nodes[None, :]
    values = np.asarray(data(points.ravel()), dtype=float).reshape(points.shape)
    return FvState(dx, x_left, 0.5 * values @ weights, 0.0)


# ── Evolution ─────────────────────────────────────────────────────────────────

def _source_step(law: ScalarLaw, u: np.ndarray, h: float) -> np.ndarray:
    g = law.source
    k1 = g(u)
    k2 = g(u + 0.5 * h * k1)
    k3 = g(u + 0.5 * h * k2)
    k4 = g(u + h * k3)
    return u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _transport_step(law: ScalarLaw, u: np.ndarray, dt: float, dx: float) -> np.ndarray:
    padded = np.concatenate([u[:1], u, u[-1:]])
    flux = godunov_flux(law, padded[:-1], padded[1:])
    return u - dt / dx * (flux[1:] - flux[:-1])


class FvTrajectory:
    """States of one FV run at the requested output times."""

    def __init__(self, law: ScalarLaw, states: List[FvState], n_steps: int) -> None:
        self.law = law
        self.states = states
        self.n_steps = n_steps

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> FvState:
        return self.states[-1]

    def at(self, t: float) -> FvState:
        times = self.times
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise WindowMismatchError("no FV output at t={}".format(t))
        return self.states[k]

    def total_variation(self) -> np.ndarray:
        return np.array([total_variation(s) for s in self.states])

    def __len__(self) -> int:
        return len(self.states)


def check_cfl(cfl: float) -> None:
    if not 0.0 < cfl <= CFL_MAX:
        raise CflError("cfl must lie in (0, {}], got {}".format(CFL_MAX, cfl))


def evolve_fv(
    law: ScalarLaw,
    init: FvState,
    t_final: float,
    cfl: float = DEFAULT_CFL,
    output_times: Optional[Sequence[float]] = None,
    on_step: Optional[StepCallback] = None,
) -> FvTrajectory:
    """Strang-split Godunov run from init.t to t_final.

    Steps are shortened to land exactly on each output time.  on_step is
    called after every step with (t, cells); returning True stops the run.
    """
    check_cfl(cfl)
    if not t_final > init.t:
        raise ValueError("t_final must exceed the initial time")
    targets = sorted(float(t) for t in (output_times or [t_final]) if init.t < t <= t_final)
    if not targets or targets[-1] != t_final:
        targets.append(t_final)

    u = init.cells.copy()
    t = init.t
    dx = init.dx
    states = [init.copy()]
    n_steps = 0
    target = 0
    while target < len(targets):
        speed = float(np.max(np.abs(law.df(u))))
        dt = min(cfl * dx / max(speed, 1.0), targets[target] - t)
        u = _source_step(law, u, 0.5 * dt)
        u = _transport_step(law, u, dt, dx)
        u = _source_step(law, u, 0.5 * dt)
        n_steps += 1
        if not np.all(np.isfinite(u)):
            bad = int(np.argmax(~np.isfinite(u)))
            raise InstabilityError(
                "non-finite cell {} (x={:.6g}) at step {}, t={:.6g}, dt={:.3g}".format(
                    bad, init.x_left + (bad + 0.5) * dx, n_steps, t + dt, dt,
                )
            )
        if t + dt >= targets[target] - 1e-12 * max(1.0, abs(targets[target])):
            t = targets[target]
            states.append(FvState(dx, init.x_left, u.copy(), t))
            target += 1
        else:
            t += dt
        if on_step is not None and on_step(t, u):
            if states[-1].t != t:
                states.append(FvState(dx, init.x_left, u.copy(), t))
            break
    logger.debug("FV run: %d steps to t=%.6g on %d cells", n_steps, t, u.size)
    return FvTrajectory(law, states, n_steps)


# ── Diagnostics ───────────────────────────────────────────────────────────────

def total_variation(state: FvState) -> float:
    return float(np.sum(np.abs(np.diff(state.cells))))


def shock_loci(
    law: ScalarLaw,
    cells: np.ndarray,
    x_left: float,
    dx: float,
    count: int = 2,
    min_jump: float = LOCUS_MIN_JUMP,
) -> List[Tuple[float, float]]:
    """Steepest compressive interfaces as (position, |jump|), sorted by position.

    Candidates are local maxima of |Δu| above min_jump where Δu·f''(ū) < 0;
    they are accepted greedily by size, more than MERGE_CELLS cells apart.
    """
    du = np.diff(cells)
    mid = 0.5 * (cells[1:] + cells[:-1])
    size = np.abs(du)
    compressive = du * law._d2f(mid) < 0.0
    left = np.concatenate([[0.0], size[:-1]])
    right = np.concatenate([size[1:], [0.0]])
    peaks = np.nonzero(compressive & (size > min_jump) & (size >= left) & (size >= right))[0]
    chosen = []  # type: List[int]
    for i in peaks[np.argsort(-size[peaks], kind="stable")]:
        if all(abs(int(i) - j) > MERGE_CELLS for j in chosen):
            chosen.append(int(i))
            if len(chosen) == count:
                break
    return sorted((x_left + (i + 1) * dx, float(size[i])) for i in chosen)


class MergeEstimate:
    """FV merge time: first detection and the extrapolated gap zero."""

    def __init__(
        self,
        t_detect: Optional[float],
        t_extrapolated: Optional[float],
        history: np.ndarray,
    ) -> None:
        self.t_detect = t_detect
        self.t_extrapolated = t_extrapolated
        self.history = history

    @property
    def best(self) -> Optional[float]:
        return self.t_extrapolated if self.t_extrapolated is not None else self.t_detect

    def __repr__(self) -> str:
        return "MergeEstimate(detect={}, extrapolated={})".format(
            self.t_detect, self.t_extrapolated,
        )


def fv_merge_time(
    law: ScalarLaw,
    init: FvState,
    t_final: float,
    cfl: float = DEFAULT_CFL,
) -> MergeEstimate:
    """Run until the two steepest loci come within MERGE_CELLS cells.

    The gap history with at least MERGE_FIT_MIN_CELLS cells of separation is
    fitted by a line over its last MERGE_FIT_SAMPLES samples and
    extrapolated to zero.
    """
    dx = init.dx
    history = []  # type: List[Tuple[float, float]]
    detected = []  # type: List[float]

    def watch(t: float, cells: np.ndarray) -> bool:
        loci = shock_loci(law, cells, init.x_left, dx)
        if len(loci) < 2:
            detected.append(t)
            return True
        gap = loci[1][0] - loci[0][0]
        if gap <= MERGE_CELLS * dx + 1e-12:
            detected.append(t)
            return True
        if gap >= MERGE_FIT_MIN_CELLS * dx:
            history.append((t, gap))
        return False

    evolve_fv(law, init, t_final, cfl, on_step=watch)
    hist = np.array(history, dtype=float).reshape(-1, 2)
    t_detect = detected[0] if detected else None
    t_extrapolated = None
    if len(hist) >= 2:
        tail = hist[-MERGE_FIT_SAMPLES:]
        slope_, intercept = np.polyfit(tail[:, 0], tail[:, 1], 1)
        if slope_ < 0.0:
            t_extrapolated = float(-intercept / slope_)
    if t_detect is None:
        logger.info("FV loci did not merge before t=%.6g", t_final)
    else:
        logger.info("FV merge detected at t=%.6g (extrapolated %s)", t_detect, t_extrapolated)
    return MergeEstimate(t_detect, t_extrapolated, hist)


def reference_averages(solution, t: float, lefts: np.ndarray, dx: float) -> np.ndarray:
    """Cell averages of solution over [left, left + dx].

    Each cell is split at the tracked shocks inside it and every piece gets
    three-point Gauss–Legendre, so a shock cell carries its exact mass.
    """
    lefts = np.asarray(lefts, dtype=float)
    rights = lefts + dx
    cuts = [lefts]
    for p in solution.shock_positions(t):
        cuts.append(np.clip(p, lefts, rights))
    cuts.append(rights)
    edges = np.sort(np.column_stack(cuts), axis=1)
    nodes, weights = leggauss(3)
    total = np.zeros(lefts.shape)
    for j in range(edges.shape[1] - 1):
        a, b = edges[:, j], edges[:, j + 1]
        half = 0.5 * (b - a)
        points = (0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]
        values = solution.evaluate_many(t, points.ravel()).reshape(points.shape)
        total += half * (values @ weights)
    return total / dx


def compare(
    solution,
    state: FvState,
    t: Optional[float] = None,
    norm: Norm = "L1",
    radius: float = 0.0,
    window: Optional[Tuple[float, float]] = None,
) -> float:
    """Discrepancy between a glued (or smooth) solution and FV cell averages.

    solution needs evaluate_many(t, xs), shock_positions(t) and span(t).
    L1 sums over cells lying inside the window and compares against the
    reference cell averages; Linf compares at cell centers and skips cells
    within radius of any tracked shock.
    """
    t = state.t if t is None else t
    if abs(t - state.t) > 1e-9 * max(1.0, abs(t)):
        raise WindowMismatchError("FV state is at t={}, comparison at t={}".format(state.t, t))
    lo, hi = solution.span(t)
    if window is None:
        window = (max(lo, state.x_left), min(hi, state.x_right))
    w_lo, w_hi = window
    if not w_lo < w_hi:
        raise WindowMismatchError("empty comparison window {}".format(window))
    if w_lo < lo or w_hi > hi or w_lo < state.x_left or w_hi > state.x_right:
        raise WindowMismatchError(
            "window {} not covered by solution span ({}, {}) and FV domain ({}, {})".format(
                window, lo, hi, state.x_left, state.x_right,
            )
        )
    if norm == "L1":
        lefts = state.centers - 0.5 * state.dx
        eps = 1e-12 * max(1.0, abs(w_lo), abs(w_hi))
        inside = (lefts >= w_lo - eps) & (lefts + state.dx <= w_hi + eps)
        if not np.any(inside):
            raise WindowMismatchError("no whole cell inside window {}".format(window))
        lefts = np.clip(lefts[inside], w_lo, w_hi - state.dx)
        diff = np.abs(reference_averages(solution, t, lefts, state.dx) - state.cells[inside])
        return float(np.sum(diff) * state.dx)
    if norm == "Linf":
        x = state.centers
        mask = (x >= w_lo) & (x <= w_hi)
        diff = np.abs(solution.evaluate_many(t, x[mask]) - state.cells[mask])
        keep = np.ones(diff.shape, dtype=bool)
        for p in solution.shock_positions(t):
            keep &= np.abs(x[mask] - p) > radius
        return float(np.max(diff[keep])) if np.any(keep) else 0.0
    raise ValueError("unknown norm {!r}".format(norm))


def convergence_order(dxs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log error against log dx."""
    if len(dxs) < 2:
        raise ValueError("need at least two levels")
    if any(not (e > 0.0 and math.isfinite(e)) for e in errors):
        raise ValueError("errors must be positive and finite")
    order, _ = np.polyfit(np.log(dxs), np.log(errors), 1)
    return float(order)
