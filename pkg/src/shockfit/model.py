"""Balance law, reference Riemann shock and pointwise admissibility predicates.

The law is ∂t u + ∂x f(u) = g(u) with polynomial f and g.  Derivatives come
from exact coefficient differentiation (numpy.polynomial), never from finite
differences.

Admissibility checks follow the coarse-filter convention: each predicate
returns its verdict plus a margin, and `check_admissibility` collects the
failing reason codes in check order.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from shockfit.constants import EQUILIBRIUM_TOL, OLEINIK_SAMPLES, OLEINIK_TIE_TOL, SLOPE_SWITCH

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Reason codes
REASON_NOT_EQUILIBRIUM = "ENDSTATE_NOT_EQUILIBRIUM"
REASON_SPECTRALLY_UNSTABLE = "ENDSTATE_SPECTRALLY_UNSTABLE"
REASON_OLEINIK_VIOLATED = "OLEINIK_VIOLATED"
REASON_GNL_DEGENERATE = "GENUINE_NONLINEARITY_DEGENERATE"

FLUX_FAMILIES = frozenset({"burgers", "cubic", "linear", "polynomial"})
SOURCE_FAMILIES = frozenset({"zero", "bistable", "linear", "polynomial"})


class DomainError(ValueError):
    """Raised when an operation is called outside its mathematical domain."""


def _scalar_or_array(value: np.ndarray, like: Any) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


class ScalarLaw:
    """Polynomial flux f and source g with their derivatives."""

    def __init__(
        self,
        flux_coefficients: Sequence[float],
        source_coefficients: Sequence[float] = (0.0,),
        description: str = "",
    ) -> None:
        flux = np.asarray(flux_coefficients, dtype=float)
        source = np.asarray(source_coefficients, dtype=float)
        if flux.ndim != 1 or flux.size == 0 or not np.all(np.isfinite(flux)):
            raise DomainError("flux coefficients must be a non-empty finite vector")
        if source.ndim != 1 or source.size == 0 or not np.all(np.isfinite(source)):
            raise DomainError("source coefficients must be a non-empty finite vector")

        self.flux = Polynomial(flux)
        self.source = Polynomial(source)
        self.description = description or "f={} g={}".format(list(flux), list(source))

        self._df = self.flux.deriv(1)
        self._d2f = self.flux.deriv(2)
        self._d3f = self.flux.deriv(3)
        self._dg = self.source.deriv(1)

        roots = self._df.roots() if self._df.degree() > 0 else np.empty(0)
        real = roots[np.abs(np.imag(roots)) <= 1e-12 * (1.0 + np.abs(roots))]
        self.flux_critical_points = np.sort(np.real(real))

    # ── evaluation ────────────────────────────────────────────────────────────

    def f(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self.flux(u), u)

    def df(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self._df(u), u)

    def d2f(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self._d2f(u), u)

    def d3f(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self._d3f(u), u)

    def g(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self.source(u), u)

    def dg(self, u: ArrayLike) -> ArrayLike:
        return _scalar_or_array(self._dg(u), u)

    def secant(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        """Divided difference (f(b)-f(a))/(b-a) expanded per monomial.

        Uses (b^k - a^k)/(b - a) = sum_j a^j b^(k-1-j), so there is no
        subtraction of nearly equal values and a == b gives f'(a).
        """
        a_arr = np.asarray(a, dtype=float)
        b_arr = np.asarray(b, dtype=float)
        coef = self.flux.coef
        result = np.zeros(np.broadcast(a_arr, b_arr).shape)
        h = np.ones_like(result)
        b_pow = np.ones_like(result)
        for k in range(1, coef.size):
            if k > 1:
                b_pow = b_pow * b_arr
                h = b_pow + a_arr * h
            result = result + coef[k] * h
        return _scalar_or_array(result, a if np.ndim(a) >= np.ndim(b) else b)

    def with_source(
        self, source_coefficients: Sequence[float], description: str = "",
    ) -> "ScalarLaw":
        """Same flux, different source (per-side laws share the flux)."""
        return ScalarLaw(self.flux.coef, source_coefficients, description)

    def same_flux(self, other: "ScalarLaw") -> bool:
        a, b = self.flux.coef, other.flux.coef
        n = max(a.size, b.size)
        return bool(np.array_equal(np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))))

    def __repr__(self) -> str:
        return "ScalarLaw({})".format(self.description)


# ── Built-in families ─────────────────────────────────────────────────────────

def flux_coefficients(family: str, params: Optional[Mapping[str, Any]] = None) -> List[float]:
    """Coefficient vector (ascending powers) for a named flux family."""
    params = dict(params or {})
    if family == "burgers":
        return [0.0, 0.0, 0.5 * float(params.get("scale", 1.0))]
    if family == "cubic":
        return [0.0, 0.0, 0.0, float(params.get("scale", 1.0)) / 3.0]
    if family == "linear":
        return [0.0, float(params.get("speed", 1.0))]
    if family == "polynomial":
        coefficients = params.get("coefficients")
        if not coefficients:
            raise DomainError("polynomial flux needs coefficients")
        return [float(c) for c in coefficients]
    raise DomainError("unknown flux family: {}".format(family))


def source_coefficients(family: str, params: Optional[Mapping[str, Any]] = None) -> List[float]:
    """Coefficient vector (ascending powers) for a named source family."""
    params = dict(params or {})
    if family == "zero":
        return [0.0]
    if family == "bistable":
        return [0.0, 1.0, 0.0, -1.0]
    if family == "linear":
        beta = float(params.get("beta", 1.0))
        center = float(params.get("center", 0.0))
        return [beta * center, -beta]
    if family == "polynomial":
        coefficients = params.get("coefficients")
        if not coefficients:
            raise DomainError("polynomial source needs coefficients")
        return [float(c) for c in coefficients]
    raise DomainError("unknown source family: {}".format(family))


def build_law(
    flux_family: str,
    source_family: str = "zero",
    flux_params: Optional[Mapping[str, Any]] = None,
    source_params: Optional[Mapping[str, Any]] = None,
) -> ScalarLaw:
    description = "{}/{}".format(flux_family, source_family)
    return ScalarLaw(
        flux_coefficients(flux_family, flux_params),
        source_coefficients(source_family, source_params),
        description,
    )


def burgers(source: str = "zero", **source_params: Any) -> ScalarLaw:
    """Shorthand for f = u²/2 with a named source."""
    return build_law("burgers", source, source_params=source_params)


# ── Reference shock ───────────────────────────────────────────────────────────

def shock_speed(law: ScalarLaw, u_minus: float, u_plus: float) -> float:
    """Rankine–Hugoniot speed (f(u+) - f(u-)) / (u+ - u-)."""
    if u_plus == u_minus:
        raise DomainError("shock speed undefined for equal endstates {}".format(u_minus))
    return float(law.secant(u_minus, u_plus))


class RiemannShockSpec:
    """Endstates, speed and initial position of a Riemann shock."""

    def __init__(self, u_minus: float, u_plus: float, sigma: float, psi0: float = 0.0) -> None:
        if u_minus == u_plus:
            raise DomainError("Riemann shock needs distinct endstates")
        self.u_minus = float(u_minus)
        self.u_plus = float(u_plus)
        self.sigma = float(sigma)
        self.psi0 = float(psi0)

    @classmethod
    def from_endstates(
        cls, law: ScalarLaw, u_minus: float, u_plus: float, psi0: float = 0.0,
    ) -> "RiemannShockSpec":
        return cls(u_minus, u_plus, shock_speed(law, u_minus, u_plus), psi0)

    @property
    def jump(self) -> float:
        return self.u_plus - self.u_minus

    def profile(self, x: ArrayLike, t: float = 0.0) -> ArrayLike:
        """Unperturbed wave Ū(x - ψ0 - σt)."""
        xi = np.asarray(x, dtype=float) - self.psi0 - self.sigma * t
        out = np.where(xi < 0.0, self.u_minus, self.u_plus)
        return _scalar_or_array(out, x)

    def __repr__(self) -> str:
        return "RiemannShockSpec(u-={}, u+={}, sigma={}, psi0={})".format(
            self.u_minus, self.u_plus, self.sigma, self.psi0,
        )


# ── Slope function and chord gap ──────────────────────────────────────────────

def slope(law: ScalarLaw, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Integral mean of f' between a and b.

    Above the switch threshold this is the divided difference; below it the
    midpoint expansion f'(m) + f'''(m) h²/24.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    h = b_arr - a_arr
    mid = 0.5 * (a_arr + b_arr)
    taylor = law._df(mid) + law._d3f(mid) * h * h / 24.0
    secant = np.asarray(law.secant(a_arr, b_arr))
    out = np.where(np.abs(h) > SLOPE_SWITCH, secant, taylor)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out)
    return out


def chord_gap(law: ScalarLaw, a: ArrayLike, b: ArrayLike, tau: ArrayLike) -> ArrayLike:
    """S_f(a, b, τ) = s_f(a, m) - s_f(b, m) with m = τa + (1-τ)b."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any((tau_arr < 0.0) | (tau_arr > 1.0)):
        raise DomainError("tau must lie in [0, 1]")
    m = tau_arr * a + (1.0 - tau_arr) * b
    return slope(law, a, m) - slope(law, b, m)


# ── Pointwise predicates ──────────────────────────────────────────────────────

def check_equilibrium(
    law: ScalarLaw, u: float, tol: float = EQUILIBRIUM_TOL,
) -> Tuple[float, float, bool]:
    """Return (g(u), g'(u), stable) with stable ⇔ |g(u)| ≤ tol and g'(u) < 0."""
    g_value = float(law.g(u))
    g_prime = float(law.dg(u))
    return g_value, g_prime, abs(g_value) <= tol and g_prime < 0.0


def check_lax(
    law: ScalarLaw, u_left: float, u_right: float, speed: float,
) -> Tuple[bool, float, float]:
    """Lax condition f'(u_right) < speed < f'(u_left) with both margins."""
    left_margin = float(law.df(u_left)) - speed
    right_margin = speed - float(law.df(u_right))
    return left_margin > 0.0 and right_margin > 0.0, left_margin, right_margin


def _single_signed_second_derivative(law: ScalarLaw, lo: float, hi: float) -> bool:
    d2f = law._d2f
    if d2f.degree() == 0:
        return bool(d2f.coef[0] != 0.0)
    ends = d2f(np.array([lo, hi]))
    if np.any(ends == 0.0) or ends[0] * ends[1] < 0.0:
        return False
    roots = d2f.roots()
    real = np.real(roots[np.abs(np.imag(roots)) <= 1e-12])
    return not np.any((real > lo) & (real < hi))


class OleinikCheck:
    """Endpoint Lax inequalities plus sampled chord inequality."""

    def __init__(
        self,
        ok: bool,
        margin: float,
        endpoint_margins: Tuple[float, float],
        taus: np.ndarray,
        chord_margins: np.ndarray,
        graph_gaps: np.ndarray,
        convex_shortcut: bool,
        scaled_gaps: Optional[np.ndarray] = None,
        margin_tau: Optional[float] = None,
    ) -> None:
        self.ok = ok
        self.margin = margin
        self.endpoint_margins = endpoint_margins
        self.taus = taus
        self.chord_margins = chord_margins
        self.graph_gaps = graph_gaps
        self.convex_shortcut = convex_shortcut
        self.scaled_gaps = scaled_gaps if scaled_gaps is not None else chord_margins
        self.margin_tau = margin_tau


def check_oleinik(
    law: ScalarLaw, shock: RiemannShockSpec, n_samples: int = OLEINIK_SAMPLES,
) -> OleinikCheck:
    """Oleinik condition at n_samples interior τ values.

    chord_margins are S_f(u-, u+, τ), which tend to the endpoint margins as
    τ → 0, 1; graph_gaps are the vertical distances between the chord and the
    graph of f at m = τu- + (1-τ)u+, oriented so that admissible is positive.
    scaled_gaps divide graph_gaps by (u- - m)(m - u+), which equals
    S_f/|u- - u+|: the oriented second divided difference f[u-, m, u+].

    The reported margin is the smallest of the endpoint margins and the
    scaled gaps; margin_tau is the τ where a scaled gap attains it, ties
    going to the sample nearest τ = 1/2, and None when an endpoint binds.
    When f'' is single-signed between the endstates the chord inequality
    follows from the endpoint inequalities and the samples only feed margins.
    """
    if n_samples < 2:
        raise DomainError("n_samples must be at least 2")
    u_m, u_p, sigma = shock.u_minus, shock.u_plus, shock.sigma
    endpoint = (sigma - float(law.df(u_p)), float(law.df(u_m)) - sigma)

    taus = np.arange(1, n_samples + 1, dtype=float) / (n_samples + 1)
    chord = np.asarray(chord_gap(law, u_m, u_p, taus))
    m = taus * u_m + (1.0 - taus) * u_p
    chord_line = law.f(u_m) + sigma * (m - u_m)
    graph_gaps = np.sign(u_m - u_p) * (chord_line - law.flux(m))
    scaled = chord / abs(u_m - u_p)

    endpoints_ok = endpoint[0] > 0.0 and endpoint[1] > 0.0
    shortcut = _single_signed_second_derivative(law, min(u_m, u_p), max(u_m, u_p))
    if shortcut:
        ok = endpoints_ok
    else:
        ok = endpoints_ok and bool(np.all(chord > 0.0))

    lowest = float(np.min(scaled))
    tied = np.nonzero(scaled <= lowest + OLEINIK_TIE_TOL * max(1.0, abs(lowest)))[0]
    at = int(tied[np.argmin(np.abs(taus[tied] - 0.5))])
    margin = float(min(endpoint[0], endpoint[1], lowest))
    margin_tau = float(taus[at]) if lowest <= min(endpoint) else None
    return OleinikCheck(
        ok, margin, endpoint, taus, chord, graph_gaps, shortcut, scaled, margin_tau,
    )


class AdmissibilityReport:
    """Flags and margins of every pointwise condition on a Riemann shock."""

    def __init__(
        self,
        equilibrium_ok: Tuple[bool, bool],
        spectral_ok: Tuple[bool, bool],
        oleinik: OleinikCheck,
        gnl_ok: Tuple[bool, bool],
        margins: Dict[str, float],
        reasons: List[str],
        g_prime: Tuple[float, float],
    ) -> None:
        self.equilibrium_ok = equilibrium_ok
        self.spectral_ok = spectral_ok
        self.oleinik = oleinik
        self.oleinik_ok = oleinik.ok
        self.gnl_ok = gnl_ok
        self.margins = margins
        self.reasons = reasons
        self.g_prime = g_prime

    @property
    def admissible(self) -> bool:
        return not self.reasons

    @property
    def slowest_rate(self) -> float:
        """max g'(ū±): the decay rate the perturbations settle to."""
        return max(self.g_prime)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "equilibrium_ok": list(self.equilibrium_ok),
            "spectral_ok": list(self.spectral_ok),
            "oleinik_ok": self.oleinik_ok,
            "gnl_ok": list(self.gnl_ok),
            "margins": dict(self.margins),
            "reasons": list(self.reasons),
        }


def check_admissibility(
    law: ScalarLaw,
    shock: RiemannShockSpec,
    tol: float = EQUILIBRIUM_TOL,
    n_samples: int = OLEINIK_SAMPLES,
    right_law: Optional[ScalarLaw] = None,
) -> AdmissibilityReport:
    """Run every predicate; right_law overrides the source on the + side."""
    plus_law = right_law or law
    if not law.same_flux(plus_law):
        raise DomainError("left and right laws must share the flux")

    g_m, dg_m, _ = check_equilibrium(law, shock.u_minus, tol)
    g_p, dg_p, _ = check_equilibrium(plus_law, shock.u_plus, tol)
    oleinik = check_oleinik(law, shock, n_samples)
    d2f_m = float(law.d2f(shock.u_minus))
    d2f_p = float(law.d2f(shock.u_plus))

    equilibrium_ok = (abs(g_m) < tol, abs(g_p) < tol)
    spectral_ok = (dg_m < 0.0, dg_p < 0.0)
    gnl_ok = (d2f_m != 0.0, d2f_p != 0.0)

    margins = {
        "equilibrium_minus": tol - abs(g_m),
        "equilibrium_plus": tol - abs(g_p),
        "spectral_minus": -dg_m,
        "spectral_plus": -dg_p,
        "oleinik": oleinik.margin,
        "gnl_minus": abs(d2f_m),
        "gnl_plus": abs(d2f_p),
    }

    reasons = []  # type: List[str]
    if not all(equilibrium_ok):
        reasons.append(REASON_NOT_EQUILIBRIUM)
    if not all(spectral_ok):
        reasons.append(REASON_SPECTRALLY_UNSTABLE)
    if not oleinik.ok:
        reasons.append(REASON_OLEINIK_VIOLATED)
    if not all(gnl_ok):
        reasons.append(REASON_GNL_DEGENERATE)

    if reasons:
        logger.warning("Shock %r not admissible: %s", shock, ", ".join(reasons))
    return AdmissibilityReport(
        equilibrium_ok, spectral_ok, oleinik, gnl_ok, margins, reasons, (dg_m, dg_p),
    )
