"""Resolvent of the transport operator and spectrum of the Riemann shock.

For L = -a ∂x + b with a bounded away from zero and Re λ > sup b, the
equation (λ - L) v = F has the unique bounded solution

    v(x) = ∫_{-∞}^x exp(∫_y^x κ) G(y) dy,   κ = (b - λ)/a,  G = F/a

when a > 0; for a < 0 the same formula holds after reversing x.  On a
uniform grid the nested integrals are evaluated by the one-step recursion

    v_{i+1} = E_i v_i + ∫_{x_i}^{x_{i+1}} exp(A_{i+1} - A(y)) G(y) dy

with A the cumulative integral of κ and E_i = exp(A_{i+1} - A_i).  Both A
and the step integrals use the trapezoid rule with its endpoint derivative
correction, which makes the scheme fourth-order.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal

from shockfit.constants import (
    ELLIPTICITY_FLOOR,
    LAMBDA_ZERO_TOL,
    RESOLVENT_MAX_NODES,
    RESOLVENT_NODES,
    RESOLVENT_WIDTH_FACTOR,
)
from shockfit.model import (
    RiemannShockSpec,
    ScalarLaw,
    check_admissibility,
)

logger = logging.getLogger(__name__)

Coefficient = Union[float, complex, Callable[[np.ndarray], np.ndarray]]
SpectrumClass = Literal["resolvent_set", "essential_spectrum", "eigenvalue"]

RESOLVENT_SET = "resolvent_set"
ESSENTIAL_SPECTRUM = "essential_spectrum"
EIGENVALUE = "eigenvalue"

SCAN_HALF_WIDTH = 100.0
SCAN_NODES = 4001


class SpectralMarginError(ValueError):
    """Raised when Re λ does not exceed sup b by the declared margin."""


class EllipticityError(ValueError):
    """Raised when the transport coefficient vanishes or changes sign on the grid."""


class PreconditionError(ValueError):
    """Raised when the spectrum of a non-admissible shock is requested."""


def _as_function(c: Coefficient) -> Callable[[np.ndarray], np.ndarray]:
    if callable(c):
        return c
    value = c

    def constant(x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), value, dtype=complex if isinstance(value, complex) else float)

    return constant


# ── Problem ───────────────────────────────────────────────────────────────────

class ResolventProblem:
    """(λ - L_{a,b}) v = F on a uniform grid.

    When no grid is given the half-width is RESOLVENT_WIDTH_FACTOR·sup|a| /
    (Re λ - sup b), with sup|a| and sup b sampled on [-100, 100].
    """

    def __init__(
        self,
        a: Coefficient,
        b: Coefficient,
        lam: complex,
        forcing: Coefficient,
        grid: Optional[np.ndarray] = None,
        n_nodes: int = RESOLVENT_NODES,
        margin: float = 0.0,
        center: float = 0.0,
    ) -> None:
        self.a = _as_function(a)
        self.b = _as_function(b)
        self.lam = complex(lam)
        self.forcing = _as_function(forcing)
        self.margin = margin

        if grid is None:
            scan = np.linspace(center - SCAN_HALF_WIDTH, center + SCAN_HALF_WIDTH, SCAN_NODES)
            gap = self.lam.real - float(np.max(np.real(self.b(scan))))
            if gap <= margin:
                raise SpectralMarginError(
                    "Re(lambda)={} does not exceed sup b by {}".format(self.lam.real, margin),
                )
            half = RESOLVENT_WIDTH_FACTOR * float(np.max(np.abs(self.a(scan)))) / gap
            n = min(int(n_nodes), RESOLVENT_MAX_NODES)
            grid = np.linspace(center - half, center + half, n)
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 9:
            raise ValueError("resolvent grid needs at least 9 nodes")

        self.a_values = np.real(np.asarray(self.a(self.grid), dtype=complex))
        self.b_values = np.real(np.asarray(self.b(self.grid), dtype=complex))
        self.f_values = np.asarray(self.forcing(self.grid), dtype=complex)

        if np.min(np.abs(self.a_values)) <= ELLIPTICITY_FLOOR:
            raise EllipticityError("a vanishes on the grid")
        if np.any(np.sign(self.a_values) != np.sign(self.a_values[0])):
            raise EllipticityError("a changes sign on the grid")
        if self.lam.real - self.sup_b <= margin:
            raise SpectralMarginError(
                "Re(lambda)={} does not exceed sup b={} by {}".format(
                    self.lam.real, self.sup_b, margin,
                )
            )

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def sup_b(self) -> float:
        return float(np.max(self.b_values))

    @property
    def spectral_gap(self) -> float:
        return self.lam.real - self.sup_b

    @property
    def sup_bound(self) -> float:
        """‖F‖∞/(Re λ - sup b)."""
        return float(np.max(np.abs(self.f_values))) / self.spectral_gap


# ── Solver ────────────────────────────────────────────────────────────────────

def _derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference; two nodes at each edge are second-order."""
    d = np.gradient(values, h, edge_order=2)
    d[2:-2] = (-values[4:] + 8.0 * values[3:-1] - 8.0 * values[1:-3] + values[:-4]) / (12.0 * h)
    return d


def _corrected_cumulative(values: np.ndarray, h: float) -> np.ndarray:
    """∫_{x_0}^{x_i} of a sampled smooth function, fourth-order."""
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * h * (values[1:] + values[:-1]))
    d = _derivative(values, h)
    return out - h * h / 12.0 * (d - d[0])


def _solve_increasing(
    a: np.ndarray, b: np.ndarray, f: np.ndarray, lam: complex, h: float,
) -> np.ndarray:
    """Recursion for a > 0, started from the frozen-coefficient value -G/κ."""
    kappa = (b - lam) / a
    g = f / a
    area = _corrected_cumulative(kappa, h)
    g_prime = _derivative(g, h)
    growth = np.exp(np.diff(area))
    phi_prime = g_prime - kappa * g

    v = np.empty_like(g)
    v[0] = -g[0] / kappa[0]
    for i in range(g.size - 1):
        e = growth[i]
        v[i + 1] = (
            e * v[i]
            + 0.5 * h * (e * g[i] + g[i + 1])
            - h * h / 12.0 * (phi_prime[i + 1] - e * phi_prime[i])
        )
    return v


def resolvent_solve(prob: ResolventProblem) -> "ResolventSolution":
    """Sampled v̌ with (λ - L)v̌ = F on prob.grid."""
    a, b, f = prob.a_values, prob.b_values, prob.f_values
    if a[0] > 0.0:
        v = _solve_increasing(a, b, f, prob.lam, prob.h)
    else:
        v = _solve_increasing(-a[::-1], b[::-1], f[::-1], prob.lam, prob.h)[::-1]
    return ResolventSolution(prob, v)


class ResolventSolution:
    """v̌ on the grid with residual and bound diagnostics."""

    def __init__(self, problem: ResolventProblem, values: np.ndarray) -> None:
        self.problem = problem
        self.values = values

    @property
    def grid(self) -> np.ndarray:
        return self.problem.grid

    def interior(self) -> np.ndarray:
        """Mask of the central half of the grid."""
        x = self.grid
        mid = 0.5 * (x[0] + x[-1])
        quarter = 0.25 * (x[-1] - x[0])
        mask = np.abs(x - mid) <= quarter
        mask[:2] = False
        mask[-2:] = False
        return mask

    def derivative(self) -> np.ndarray:
        return _derivative(self.values, self.problem.h)

    def residual(self) -> float:
        """‖(λ - L)v̌ - F‖∞ on the interior half."""
        p = self.problem
        r = p.lam * self.values + p.a_values * self.derivative() - p.b_values * self.values
        r = r - p.f_values
        return float(np.max(np.abs(r[self.interior()])))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sup_bound_slack(self) -> float:
        """Bound minus measured sup; negative means the bound is violated."""
        return self.problem.sup_bound - self.sup

    def gradient_sup_bound(self) -> Optional[float]:
        """‖F'‖∞/(Re λ - b + inf a'), or None outside its hypotheses."""
        p = self.problem
        if np.ptp(p.b_values) > 0.0:
            return None
        inf_da = float(np.min(_derivative(p.a_values, p.h)))
        denominator = p.lam.real - float(p.b_values[0]) + inf_da
        if denominator <= 0.0:
            return None
        df = _derivative(p.f_values, p.h)
        return float(np.max(np.abs(df))) / denominator

    def gradient_l1_bound(self) -> Optional[float]:
        """‖F'‖₁/(Re λ - b) for constant b, or None."""
        p = self.problem
        if np.ptp(p.b_values) > 0.0:
            return None
        df = _derivative(p.f_values, p.h)
        return float(np.sum(np.abs(df)) * p.h) / (p.lam.real - float(p.b_values[0]))

    def gradient_l1(self) -> float:
        return float(np.sum(np.abs(self.derivative())) * self.problem.h)

    def at(self, x: float) -> complex:
        """v̌(x) by linear interpolation."""
        re = np.interp(x, self.grid, np.real(self.values))
        im = np.interp(x, self.grid, np.imag(self.values))
        return complex(re, im)


# ── Riemann-shock spectrum ────────────────────────────────────────────────────

class SpectrumVerdict:
    """Class of λ, with the solved test problem for resolvent-set points."""

    def __init__(
        self,
        lam: complex,
        kind: SpectrumClass,
        multiplicity: Optional[int] = None,
        psi_check: Optional[complex] = None,
        v_minus: Optional[ResolventSolution] = None,
        v_plus: Optional[ResolventSolution] = None,
    ) -> None:
        self.lam = lam
        self.kind = kind
        self.multiplicity = multiplicity
        self.psi_check = psi_check
        self.v_minus = v_minus
        self.v_plus = v_plus

    def __repr__(self) -> str:
        extra = ""
        if self.multiplicity is not None:
            extra = ", multiplicity={}".format(self.multiplicity)
        if self.psi_check is not None:
            extra += ", psi_check={:.6g}".format(self.psi_check)
        return "SpectrumVerdict({}, {}{})".format(self.lam, self.kind, extra)


def _half_line(
    a: float, b: float, lam: complex, forcing: Coefficient, gap: float, side: str, n_nodes: int,
) -> ResolventSolution:
    half = RESOLVENT_WIDTH_FACTOR * abs(a) / gap
    if side == "plus":
        grid = np.linspace(0.0, half, n_nodes)
    else:
        grid = np.linspace(-half, 0.0, n_nodes)
    return resolvent_solve(ResolventProblem(a, b, lam, forcing, grid=grid))


def spectrum_classify(
    law: ScalarLaw,
    shock: RiemannShockSpec,
    lam: complex,
    forcing: Coefficient = 0.0,
    phi: complex = 1.0,
    right_law: Optional[ScalarLaw] = None,
    n_nodes: int = RESOLVENT_NODES,
) -> SpectrumVerdict:
    """Classify λ for the linearization about the shock.

    The spectrum is {Re λ ≤ max g'(ū±)} ∪ {0}, with 0 simple when both
    g'(ū±) are negative.  For λ in the resolvent set the half-line problems
    are solved for the test data (F, φ) and ψ̌(λ) is returned.
    """
    report = check_admissibility(law, shock, right_law=right_law)
    if not report.admissible:
        raise PreconditionError("shock is not admissible: {}".format(", ".join(report.reasons)))
    lam = complex(lam)
    rate = report.slowest_rate

    if abs(lam) <= LAMBDA_ZERO_TOL and rate < 0.0:
        return SpectrumVerdict(lam, EIGENVALUE, multiplicity=1)
    if lam.real <= rate:
        return SpectrumVerdict(lam, ESSENTIAL_SPECTRUM)

    plus_law = right_law or law
    a_plus = float(law.df(shock.u_plus)) - shock.sigma
    a_minus = float(law.df(shock.u_minus)) - shock.sigma
    b_plus = float(plus_law.dg(shock.u_plus))
    b_minus = float(law.dg(shock.u_minus))
    v_plus = _half_line(a_plus, b_plus, lam, forcing, lam.real - b_plus, "plus", n_nodes)
    v_minus = _half_line(a_minus, b_minus, lam, forcing, lam.real - b_minus, "minus", n_nodes)

    jump = shock.u_plus - shock.u_minus
    flux_term = (a_plus * complex(v_plus.values[0]) - a_minus * complex(v_minus.values[-1])) / jump
    psi_check = (complex(phi) + flux_term) / lam
    return SpectrumVerdict(lam, RESOLVENT_SET, psi_check=psi_check, v_minus=v_minus, v_plus=v_plus)


def parse_lambda_grid(spec: str) -> Tuple[np.ndarray, np.ndarray]:
    """'re_min:re_max:n_re,im_min:im_max:n_im' → (re values, im values)."""
    try:
        re_part, im_part = spec.split(",")
        axes = []
        for part in (re_part, im_part):
            lo, hi, n = part.split(":")
            count = int(n)
            if count < 1:
                raise ValueError("count must be positive")
            axes.append(np.linspace(float(lo), float(hi), count))
    except ValueError as exc:
        raise ValueError("bad lambda grid {!r}: {}".format(spec, exc)) from exc
    return axes[0], axes[1]


def spectrum_scan(
    law: ScalarLaw,
    shock: RiemannShockSpec,
    re_values: Sequence[float],
    im_values: Sequence[float],
    forcing: Coefficient = 0.0,
    phi: complex = 1.0,
    right_law: Optional[ScalarLaw] = None,
    n_nodes: int = RESOLVENT_NODES,
) -> List[SpectrumVerdict]:
    """spectrum_classify over the product grid, real part varying slowest."""
    verdicts = []
    for re in re_values:
        for im in im_values:
            verdicts.append(spectrum_classify(
                law, shock, complex(re, im), forcing, phi, right_law, n_nodes,
            ))
    logger.info("Classified %d spectral points", len(verdicts))
    return verdicts
