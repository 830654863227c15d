"""Tests for the resolvent solver and the spectrum classification."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockfit.constants import RESOLVENT_NODES
from shockfit.model import RiemannShockSpec, burgers
from shockfit.scenarios import random_resolvent_problem
from shockfit.spectral import (
    EIGENVALUE,
    ESSENTIAL_SPECTRUM,
    RESOLVENT_SET,
    EllipticityError,
    PreconditionError,
    ResolventProblem,
    SpectralMarginError,
    parse_lambda_grid,
    resolvent_solve,
    spectrum_classify,
    spectrum_scan,
)


def _reference_shock():
    law = burgers("bistable")
    return law, RiemannShockSpec.from_endstates(law, 1.0, -1.0)


# ── Resolvent ─────────────────────────────────────────────────────────────────

def test_constant_coefficients() -> None:
    """(λ - b) v = F for constant data."""
    sol = resolvent_solve(ResolventProblem(1.0, -1.0, 1.0, 1.0, n_nodes=2001))
    mask = sol.interior()
    assert np.allclose(sol.values[mask], 0.5, atol=1e-7)
    assert sol.residual() < 1e-6
    assert sol.sup_bound_slack() >= -1e-7


@pytest.mark.parametrize("a, coefficients", [(2.0, (0.2, 0.4)), (-2.0, (0.2, -0.4))])
def test_periodic_forcing_exact(a: float, coefficients) -> None:
    """λv + a v' = cos x has v = A cos x + B sin x; both transport directions."""
    sol = resolvent_solve(ResolventProblem(a, 0.0, 1.0, np.cos))
    mask = sol.interior()
    x = sol.grid[mask]
    expected = coefficients[0] * np.cos(x) + coefficients[1] * np.sin(x)
    assert np.max(np.abs(sol.values[mask] - expected)) < 1e-7
    assert sol.residual() < 1e-6
    assert sol.at(0.0) == pytest.approx(complex(coefficients[0], 0.0), abs=1e-7)


def test_moving_frame_coefficient() -> None:
    """a → a - σ with F → F - σv' keeps the solution of λv + a v' - bv = F."""
    sigma = 0.5

    def v(x):
        return 0.24 * np.cos(x) + 0.32 * np.sin(x)

    def dv(x):
        return -0.24 * np.sin(x) + 0.32 * np.cos(x)

    still = resolvent_solve(ResolventProblem(2.0, -1.0, 0.5, np.cos))
    moving = resolvent_solve(
        ResolventProblem(2.0 - sigma, -1.0, 0.5, lambda x: np.cos(x) - sigma * dv(x)),
    )
    for sol in (still, moving):
        mask = sol.interior()
        assert np.max(np.abs(sol.values[mask] - v(sol.grid[mask]))) < 1e-7
        assert sol.residual() < 1e-6


def test_variable_coefficients_bounds() -> None:
    """sup bound ‖F‖/(Re λ - sup b) and a small residual for smooth a, b."""
    prob = ResolventProblem(
        lambda x: 1.5 + 0.3 * np.sin(x),
        lambda x: -1.0 + 0.4 * np.cos(0.5 * x),
        complex(0.5, 0.7),
        lambda x: np.exp(-x * x / 4.0),
    )
    sol = resolvent_solve(prob)
    assert sol.residual() <= 1e-6 * float(np.max(np.abs(prob.f_values)))
    assert sol.sup_bound_slack() >= 0.0


def test_positivity() -> None:
    """Real λ and F ≥ 0 give v ≥ 0."""
    prob = ResolventProblem(
        lambda x: -1.0 - 0.5 * np.cos(x), -0.5, 1.0, lambda x: np.exp(-((x - 1.0) ** 2)),
    )
    sol = resolvent_solve(prob)
    assert np.min(np.real(sol.values)) >= -1e-10 * sol.sup


def test_gradient_bounds_constant_b() -> None:
    sol = resolvent_solve(ResolventProblem(2.0, -1.0, 1.0, np.sin))
    sup_bound = sol.gradient_sup_bound()
    assert sup_bound is not None
    assert float(np.max(np.abs(sol.derivative()[sol.interior()]))) <= sup_bound + 1e-6
    assert sol.gradient_l1_bound() is not None
    varying = resolvent_solve(ResolventProblem(2.0, lambda x: -1.0 + 0.1 * np.sin(x), 1.0, 1.0))
    assert varying.gradient_sup_bound() is None
    assert varying.gradient_l1_bound() is None


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=20, deadline=None)
def test_random_problems_respect_bounds(seed: int) -> None:
    """Residual and sup bound hold for random smooth coefficients."""
    prob = random_resolvent_problem(np.random.default_rng(seed), RESOLVENT_NODES)
    sol = resolvent_solve(prob)
    assert sol.residual() <= 1e-6 * float(np.max(np.abs(prob.f_values)))
    assert sol.sup_bound_slack() >= -1e-6


def test_spectral_margin_required() -> None:
    with pytest.raises(SpectralMarginError):
        ResolventProblem(1.0, 0.0, -0.5, 1.0)
    with pytest.raises(SpectralMarginError):
        ResolventProblem(1.0, -1.0, 0.0, 1.0, margin=2.0)


def test_transport_coefficient_must_not_vanish() -> None:
    grid = np.linspace(-5.0, 5.0, 101)
    with pytest.raises(EllipticityError):
        ResolventProblem(lambda x: x, -1.0, 1.0, 1.0, grid=grid)


# ── Spectrum ──────────────────────────────────────────────────────────────────

def test_reference_shock_classes() -> None:
    """0 is a simple eigenvalue, Re λ ≤ -2 essential, the rest resolvent set."""
    law, shock = _reference_shock()
    zero = spectrum_classify(law, shock, 0.0)
    assert zero.kind == EIGENVALUE
    assert zero.multiplicity == 1
    assert spectrum_classify(law, shock, -2.0).kind == ESSENTIAL_SPECTRUM
    assert spectrum_classify(law, shock, complex(-3.0, 5.0)).kind == ESSENTIAL_SPECTRUM
    one = spectrum_classify(law, shock, 1.0, phi=1.0)
    assert one.kind == RESOLVENT_SET
    assert one.psi_check == pytest.approx(1.0, abs=1e-10)


def test_psi_check_without_forcing() -> None:
    """F ≡ 0 gives ψ̌ = φ/λ."""
    law, shock = _reference_shock()
    lam = complex(-1.0, 2.0)
    verdict = spectrum_classify(law, shock, lam, phi=2.0)
    assert verdict.kind == RESOLVENT_SET
    assert abs(verdict.psi_check - 2.0 / lam) < 1e-10


def test_non_admissible_shock_rejected() -> None:
    law = burgers("bistable")
    with pytest.raises(PreconditionError):
        spectrum_classify(law, RiemannShockSpec.from_endstates(law, -1.0, 1.0), 1.0)


def test_lambda_grid_parsing() -> None:
    re, im = parse_lambda_grid("-1:1:3,0:2:2")
    assert re.tolist() == [-1.0, 0.0, 1.0]
    assert im.tolist() == [0.0, 2.0]
    for bad in ("1:2", "a:b:3,0:0:1", "0:1:0,0:0:1"):
        with pytest.raises(ValueError):
            parse_lambda_grid(bad)


def test_scan_orders_real_part_slowest() -> None:
    law, shock = _reference_shock()
    verdicts = spectrum_scan(law, shock, [-3.0, 1.0], [0.0, 1.0])
    assert [v.lam for v in verdicts] == [
        complex(-3.0, 0.0), complex(-3.0, 1.0), complex(1.0, 0.0), complex(1.0, 1.0),
    ]
    assert [v.kind for v in verdicts] == [
        ESSENTIAL_SPECTRUM, ESSENTIAL_SPECTRUM, RESOLVENT_SET, RESOLVENT_SET,
    ]
