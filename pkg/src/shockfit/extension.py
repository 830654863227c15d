"""C¹ extension of half-line data to the whole line.

Data on one side of an interface is continued across it by a quadratic blend
of width δ that brings the slope to zero, then by a constant:

    right side:  v(0+) + (x + x²/(2δ)) v'(0+)   on (-δ, 0]
                 v(0+) - (δ/2) v'(0+)           on (-∞, -δ]

with δ = 2(C0 - 1)‖v‖∞ / max(1, |v'(0+)|).  The left side is the mirror
image.  The blend derivative (1 + x/δ) v'(0+) interpolates between 0 and the
boundary slope, so every sup bound on the derivative carries over unchanged
and the value stays within C0‖v‖∞.

Shapes are closures with exact derivatives; nothing is sampled here except
when measuring extrema of analytic profiles.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from typing_extensions import Literal

from shockfit.constants import DELTA_CAP_FACTOR, EXTREMA_GRID_POINTS

logger = logging.getLogger(__name__)

Side = Literal["left", "right"]
Profile = Callable[[np.ndarray], np.ndarray]

SHAPES = frozenset({
    "none", "constant", "sech", "gaussian", "sine", "tanh", "xexp", "step_exp", "spline",
})


class ExtensionParameterError(ValueError):
    """Raised for invalid extension or shape parameters."""


# ── Profiles ──────────────────────────────────────────────────────────────────

def _sech(z: np.ndarray) -> np.ndarray:
    return 1.0 / np.cosh(np.clip(z, -700.0, 700.0))


def _sech_prime(z: np.ndarray) -> np.ndarray:
    return -_sech(z) * np.tanh(z)


def _gauss(z: np.ndarray) -> np.ndarray:
    return np.exp(-z * z)


def _gauss_prime(z: np.ndarray) -> np.ndarray:
    return -2.0 * z * np.exp(-z * z)


def _xexp(z: np.ndarray) -> np.ndarray:
    return z * np.exp(-np.maximum(z, -700.0))


def _xexp_prime(z: np.ndarray) -> np.ndarray:
    return (1.0 - z) * np.exp(-np.maximum(z, -700.0))


def _step_exp(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0.0, np.exp(-np.maximum(z, 0.0)), 0.0)


def _step_exp_prime(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0.0, -np.exp(-np.maximum(z, 0.0)), 0.0)


def _one(z: np.ndarray) -> np.ndarray:
    return np.ones_like(z)


def _zero(z: np.ndarray) -> np.ndarray:
    return np.zeros_like(z)


def _tanh_prime(z: np.ndarray) -> np.ndarray:
    return _sech(z) ** 2


# name -> (profile, derivative, decay extent in widths, smooth)
_PROFILES = {
    "none": (_zero, _zero, 1.0, True),
    "constant": (_one, _zero, 1.0, True),
    "sech": (_sech, _sech_prime, 40.0, True),
    "gaussian": (_gauss, _gauss_prime, 40.0, True),
    "sine": (np.sin, np.cos, 4.0 * math.pi, True),
    "tanh": (np.tanh, _tanh_prime, 40.0, True),
    "xexp": (_xexp, _xexp_prime, 40.0, True),
    "step_exp": (_step_exp, _step_exp_prime, 40.0, False),
}  # type: Dict[str, Tuple[Profile, Profile, float, bool]]


class Shape:
    """amplitude · profile((y - center) / width) in interface coordinates y."""

    def __init__(
        self, name: str, amplitude: float = 0.0, width: float = 1.0, center: float = 0.0,
    ) -> None:
        if name not in _PROFILES and name != "spline":
            raise ExtensionParameterError("unknown shape: {}".format(name))
        if not (math.isfinite(amplitude) and amplitude >= 0.0):
            raise ExtensionParameterError("amplitude must be finite and >= 0")
        if not (math.isfinite(width) and width > 0.0):
            raise ExtensionParameterError("width must be finite and > 0")
        if not math.isfinite(center):
            raise ExtensionParameterError("center must be finite")
        self.name = name
        self.amplitude = float(amplitude)
        self.width = float(width)
        self.center = float(center)

    @property
    def smooth(self) -> bool:
        return _PROFILES[self.name][3]

    def _z(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.center) / self.width

    def value(self, y: np.ndarray) -> np.ndarray:
        return self.amplitude * _PROFILES[self.name][0](self._z(y))

    def derivative(self, y: np.ndarray) -> np.ndarray:
        return self.amplitude / self.width * _PROFILES[self.name][1](self._z(y))

    def extent(self) -> float:
        """Distance from 0 beyond which the shape is settled or periodic."""
        return abs(self.center) + _PROFILES[self.name][2] * self.width

    def extrema(self, lo: float, hi: float) -> Tuple[float, float, float, float]:
        """(min value, max value, min derivative, max derivative) on [lo, hi].

        Infinite ends are truncated at extent(); analytic profiles are
        measured on a dense grid that includes both ends.
        """
        span = self.extent()
        if math.isinf(lo) and math.isinf(hi):
            lo_f, hi_f = -span, span
        elif math.isinf(hi):
            lo_f, hi_f = lo, lo + span
        elif math.isinf(lo):
            lo_f, hi_f = hi - span, hi
        else:
            lo_f, hi_f = lo, hi
        y = np.linspace(lo_f, hi_f, EXTREMA_GRID_POINTS)
        v = self.value(y)
        d = self.derivative(y)
        return float(v.min()), float(v.max()), float(d.min()), float(d.max())

    def __repr__(self) -> str:
        return "Shape({}, A={}, W={}, c={})".format(
            self.name, self.amplitude, self.width, self.center,
        )


class SplineShape(Shape):
    """Clamped cubic spline through (knots, values), constant outside the knots.

    Zero end slopes make the constant continuation C¹; extrema are exact,
    taken from the roots of the piecewise-cubic derivatives.
    """

    def __init__(
        self,
        knots: Sequence[float],
        values: Sequence[float],
        amplitude: float = 1.0,
        width: float = 1.0,
        center: float = 0.0,
    ) -> None:
        super().__init__("spline", amplitude, width, center)
        k = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if k.ndim != 1 or k.size < 2 or k.size != v.size:
            raise ExtensionParameterError("spline needs matching knots/values, at least 2")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
            raise ExtensionParameterError("spline knots/values must be finite")
        if np.any(np.diff(k) <= 0.0):
            raise ExtensionParameterError("spline knots must be strictly increasing")
        self.knots = k
        self.knot_values = v
        self._spline = CubicSpline(k, v, bc_type="clamped")
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)

    @property
    def smooth(self) -> bool:
        return True

    def _profile(self, z: np.ndarray) -> np.ndarray:
        return self._spline(np.clip(z, self.knots[0], self.knots[-1]))

    def _profile_prime(self, z: np.ndarray) -> np.ndarray:
        inside = (z > self.knots[0]) & (z < self.knots[-1])
        return np.where(inside, self._d1(np.clip(z, self.knots[0], self.knots[-1])), 0.0)

    def value(self, y: np.ndarray) -> np.ndarray:
        return self.amplitude * self._profile(self._z(y))

    def derivative(self, y: np.ndarray) -> np.ndarray:
        return self.amplitude / self.width * self._profile_prime(self._z(y))

    def extent(self) -> float:
        return abs(self.center) + self.width * float(np.max(np.abs(self.knots)))

    def curvature_bound(self) -> float:
        """sup |second derivative|; p'' is piecewise linear so the knots suffice."""
        c = self._d2.c
        dx = np.diff(self.knots)
        ends = np.concatenate((c[1], c[0] * dx + c[1]))
        return self.amplitude / self.width ** 2 * float(np.max(np.abs(ends)))

    def extrema(self, lo: float, hi: float) -> Tuple[float, float, float, float]:
        z_lo = (lo - self.center) / self.width
        z_hi = (hi - self.center) / self.width
        a = min(max(z_lo, self.knots[0]), self.knots[-1])
        b = max(min(z_hi, self.knots[-1]), self.knots[0])

        inner = self.knots[(self.knots > a) & (self.knots < b)]
        crit_v = self._d1.roots(extrapolate=False)
        crit_d = self._d2.roots(extrapolate=False)
        zs_v = np.concatenate(([a, b], inner, crit_v[(crit_v > a) & (crit_v < b)]))
        zs_d = np.concatenate(([a, b], inner, crit_d[(crit_d > a) & (crit_d < b)]))

        p = self._spline(zs_v)
        dp = self._d1(zs_d)
        if z_lo < self.knots[0] or z_hi > self.knots[-1]:
            dp = np.append(dp, 0.0)
        # one-sided knot limits of p' agree (C¹), so knot evaluations are exact
        scale = self.amplitude / self.width
        return (
            self.amplitude * float(p.min()),
            self.amplitude * float(p.max()),
            scale * float(dp.min()),
            scale * float(dp.max()),
        )


def make_shape(
    name: str,
    amplitude: float = 0.0,
    width: float = 1.0,
    center: float = 0.0,
    knots: Optional[Sequence[float]] = None,
    values: Optional[Sequence[float]] = None,
) -> Shape:
    if name == "spline":
        if knots is None or values is None:
            raise ExtensionParameterError("spline shape needs knots and values")
        return SplineShape(knots, values, amplitude, width, center)
    return Shape(name, amplitude, width, center)


def random_spline_shape(rng: np.random.Generator, n_knots: int = 12) -> SplineShape:
    """Random C¹ spline on knots spanning [-1, 8] with nonzero slope at 0."""
    interior = np.sort(rng.uniform(-1.0, 8.0, size=n_knots - 2))
    knots = np.unique(np.concatenate(([-1.0], interior, [8.0])))
    values = rng.normal(0.0, 1.0, size=knots.size)
    return SplineShape(knots, values, amplitude=float(rng.uniform(0.1, 2.0)))


# ── Data on part of the line ──────────────────────────────────────────────────

class _DataBase:
    """Shared evaluation for data living on an open interval (lo, hi)."""

    def __init__(self, shape: Shape, base: float, origin: float, lo: float, hi: float) -> None:
        self.shape = shape
        self.base = float(base)
        self.origin = float(origin)
        self.lo = float(lo)
        self.hi = float(hi)
        vmin, vmax, dmin, dmax = shape.extrema(lo - origin, hi - origin)
        self.deviation_bounds = (vmin, vmax)
        self.sup_norm = max(abs(vmin), abs(vmax))
        neg = max(-dmin, 0.0)
        pos = max(dmax, 0.0)
        self.slope_bounds = (neg, pos, max(neg, pos))

    def values(self, x: np.ndarray) -> np.ndarray:
        return self.base + self.shape.value(np.asarray(x, dtype=float) - self.origin)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self.shape.derivative(np.asarray(x, dtype=float) - self.origin)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def end_state(self, at: float) -> Tuple[float, float]:
        """(value, slope) at an interval end, read from the shape."""
        y = np.array([at - self.origin])
        return float(self.base + self.shape.value(y)[0]), float(self.shape.derivative(y)[0])


class HalfLineData(_DataBase):
    """ū + v0 on one side of the interface x = origin."""

    def __init__(self, side: Side, shape: Shape, base: float = 0.0, origin: float = 0.0) -> None:
        if side not in ("left", "right"):
            raise ExtensionParameterError("side must be 'left' or 'right'")
        lo, hi = (origin, math.inf) if side == "right" else (-math.inf, origin)
        super().__init__(shape, base, origin, lo, hi)
        self.side = side
        self.boundary_value, self.boundary_slope = self.end_state(origin)

    def __repr__(self) -> str:
        return "HalfLineData({}, {!r}, base={}, origin={})".format(
            self.side, self.shape, self.base, self.origin,
        )


class SegmentData(_DataBase):
    """ū + v0 on the bounded interval (lo, hi)."""

    def __init__(
        self, shape: Shape, base: float, lo: float, hi: float, origin: Optional[float] = None,
    ) -> None:
        if not lo < hi:
            raise ExtensionParameterError("segment needs lo < hi")
        super().__init__(shape, base, hi if origin is None else origin, lo, hi)


# ── Blends and extended data ──────────────────────────────────────────────────

class _Blend:
    """Quadratic C¹ continuation away from `anchor` in `direction` (±1)."""

    def __init__(
        self, anchor: float, value: float, slope: float, delta: float, direction: int,
    ) -> None:
        self.anchor = anchor
        self.value = value
        self.slope = slope
        self.delta = delta
        self.direction = direction

    @property
    def far_value(self) -> float:
        return self.value + self.direction * 0.5 * self.delta * self.slope

    def values(self, x: np.ndarray) -> np.ndarray:
        if self.delta == 0.0:
            return np.full_like(x, self.value)
        y = np.clip(self.direction * (x - self.anchor), 0.0, self.delta)
        return self.value + self.direction * (y - y * y / (2.0 * self.delta)) * self.slope

    def derivative(self, x: np.ndarray) -> np.ndarray:
        if self.delta == 0.0:
            return np.zeros_like(x)
        y = np.clip(self.direction * (x - self.anchor), 0.0, self.delta)
        return (1.0 - y / self.delta) * self.slope


class ExtendedData:
    """Whole-line C¹ data: the source on its interval, blends outside it."""

    def __init__(
        self,
        source: _DataBase,
        amplification: float,
        lower: Optional[_Blend] = None,
        upper: Optional[_Blend] = None,
        delta_capped: bool = False,
    ) -> None:
        self.source = source
        self.amplification = amplification
        self.lower = lower
        self.upper = upper
        self.delta_capped = delta_capped
        self.base = source.base

    @property
    def deltas(self) -> Tuple[float, ...]:
        return tuple(b.delta for b in (self.lower, self.upper) if b is not None)

    @property
    def delta(self) -> float:
        return max(self.deltas, default=0.0)

    @property
    def smooth(self) -> bool:
        return self.source.shape.smooth

    def _evaluate(self, x: np.ndarray, derivative: bool) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        inside = self.source.contains(x)
        if np.any(inside):
            fn = self.source.derivative if derivative else self.source.values
            out[inside] = fn(x[inside])
        below = (~inside) & (x <= self.source.lo)
        above = (~inside) & (x >= self.source.hi)
        for mask, blend in ((below, self.lower), (above, self.upper)):
            if not np.any(mask):
                continue
            if blend is None:
                fn = self.source.derivative if derivative else self.source.values
                out[mask] = fn(x[mask])
            else:
                out[mask] = blend.derivative(x[mask]) if derivative else blend.values(x[mask])
        return out[0] if scalar else out

    def values(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate(x, derivative=False)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate(x, derivative=True)

    def value_range(self) -> Tuple[float, float]:
        """Bounds of the extended values (data extrema and blend end values)."""
        lo, hi = self.source.deviation_bounds
        candidates = [self.base + lo, self.base + hi]
        for blend in (self.lower, self.upper):
            if blend is not None:
                candidates.extend([blend.value, blend.far_value])
        return min(candidates), max(candidates)

    def __repr__(self) -> str:
        return "ExtendedData({!r}, C0={}, deltas={})".format(
            self.source, self.amplification, self.deltas,
        )


def _blend_width(
    sup_norm: float, boundary_slope: float, amplification: float,
) -> Tuple[float, bool]:
    if sup_norm == 0.0:
        return 0.0, False
    delta = 2.0 * (amplification - 1.0) * sup_norm / max(1.0, abs(boundary_slope))
    cap = DELTA_CAP_FACTOR * max(1.0, sup_norm)
    if delta > cap:
        return cap, True
    return delta, False


def _check_extendable(data: _DataBase, amplification: float) -> None:
    if not (math.isfinite(amplification) and amplification > 1.0):
        raise ExtensionParameterError("amplification must be > 1, got {}".format(amplification))
    if not math.isfinite(data.sup_norm):
        raise ExtensionParameterError("data sup norm is not finite")


def extend_half_line(data: HalfLineData, amplification: float) -> ExtendedData:
    """C¹ whole-line extension of one-sided data with sup factor C0 = amplification."""
    _check_extendable(data, amplification)
    if not math.isfinite(data.boundary_slope):
        raise ExtensionParameterError("boundary slope is not finite")

    delta, capped = _blend_width(data.sup_norm, data.boundary_slope, amplification)
    if capped:
        logger.info("Blend width capped at %.6g for %r", delta, data)
    direction = -1 if data.side == "right" else 1
    blend = _Blend(data.origin, data.boundary_value, data.boundary_slope, delta, direction)
    if data.side == "right":
        return ExtendedData(data, amplification, lower=blend, delta_capped=capped)
    return ExtendedData(data, amplification, upper=blend, delta_capped=capped)


def extend_segment(data: SegmentData, amplification: float) -> ExtendedData:
    """Blend both ends of interval data, each with its own width."""
    _check_extendable(data, amplification)
    blends = []
    capped_any = False
    for anchor, direction in ((data.lo, -1), (data.hi, 1)):
        value, slope_at = data.end_state(anchor)
        if not math.isfinite(slope_at):
            raise ExtensionParameterError("end slope is not finite at {}".format(anchor))
        delta, capped = _blend_width(data.sup_norm, slope_at, amplification)
        capped_any = capped_any or capped
        blends.append(_Blend(anchor, value, slope_at, delta, direction))
    return ExtendedData(
        data, amplification, lower=blends[0], upper=blends[1], delta_capped=capped_any,
    )


def whole_line_data(shape: Shape, base: float = 0.0, origin: float = 0.0) -> ExtendedData:
    """ū + v0 given on the whole line; nothing to extend."""
    source = _DataBase(shape, base, origin, -math.inf, math.inf)
    return ExtendedData(source, amplification=1.0)
