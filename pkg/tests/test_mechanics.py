"""Tests for higher-derivative mechanics built on jet/dual evaluation.

The quantum-Lagrangian momentum oracle is hand-expanded: with
mu = hbar = 1 at a jet with (xd, xdd, xddd) = (1, 1, 0) and V = 0,

    P  = 1 - (1/4)(2*1 - 0)            = 1/2
    Pi = (1/4)*5*1 - (3/4)*1           = 1/2
    Xi = -(1/4)*1                      = -1/4
    L  = 1/2 + (1/4)(5/2)              = 9/8
    H  = P + Pi - L                    = -1/8

so the Legendre machinery is checked against arithmetic done by hand.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmotion.jets import Jet, JetOrderError, sin as jet_sin
from qmotion.kinetic_series import KineticCoefficients, sample_jets, series_momenta
from qmotion.mechanics import (
    canonical_consistency,
    classical_lagrangian,
    el_residual,
    hamiltonian,
    linear_term_acceleration,
    linear_term_demo,
    make_evaluator,
    momenta,
    quantum_lagrangian,
    series_lagrangian,
)
from qmotion.schrodinger import PhysParams, PotentialModel

PARAMS = PhysParams(hbar=1.0, mu=1.0, energy=0.0)


def motion_jet(fn, t0=0.3, order=6):
    """Jet of a scalar trajectory t -> fn(t) at t0."""
    return fn(Jet.variable(t0, order))


# ---------------------------------------------------------------------------
# Partial derivatives of black-box Lagrangians
# ---------------------------------------------------------------------------

def test_self_test_quantum():
    L = quantum_lagrangian(PARAMS)
    j = Jet((0.2, 1.1, -0.4, 0.7, 0.3, -0.2, 0.5))
    assert L.self_test(j) < 1e-6


def test_self_test_classical():
    L = classical_lagrangian(PARAMS, PotentialModel.harmonic(1.0))
    j = Jet((0.2, 1.1, -0.4, 0.7, 0.3, -0.2, 0.5))
    assert L.self_test(j) < 1e-8


def test_partials_require_enough_order():
    L = classical_lagrangian(PARAMS)
    with pytest.raises(JetOrderError):
        L.partials(Jet((0.0, 1.0, 0.0)), depth=2)


def test_partials_of_untouched_slot_are_zero():
    L = classical_lagrangian(PARAMS)  # depends on xd only (V = 0)
    p = L.partials(Jet((0.2, 1.3, 0.1, 0.4, 0.0, 0.0)), depth=2)
    assert p.dx.coeffs == (0.0, 0.0, 0.0)
    assert p.dxdd.coeffs == (0.0, 0.0, 0.0)
    assert p.dxddd.coeffs == (0.0, 0.0, 0.0)
    assert p.dxd.value == pytest.approx(1.3)


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals on known solutions
# ---------------------------------------------------------------------------

def test_classical_harmonic_solution_annihilates_el():
    L = classical_lagrangian(PARAMS, PotentialModel.harmonic(1.0))
    for t0 in [0.0, 0.4, 2.0]:
        j = motion_jet(jet_sin, t0)
        assert el_residual(L, j) == pytest.approx(0.0, abs=1e-12)


def test_classical_free_motion_annihilates_el():
    L = classical_lagrangian(PARAMS)
    j = Jet((0.7, 1.9, 0.0, 0.0, 0.0, 0.0, 0.0))
    assert el_residual(L, j) == 0.0


def test_el_residual_flags_non_solution():
    L = classical_lagrangian(PARAMS, PotentialModel.harmonic(1.0))
    j = Jet((1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))  # x = 1 frozen: needs xdd = -1
    assert abs(el_residual(L, j)) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Momenta and Hamiltonian oracles
# ---------------------------------------------------------------------------

def test_quantum_momenta_hand_oracle():
    L = quantum_lagrangian(PARAMS)
    j = Jet((0.0, 1.0, 1.0, 0.0, 0.0, 0.0))
    p, pi, xi = momenta(L, j)
    assert p == pytest.approx(0.5, abs=1e-13)
    assert pi == pytest.approx(0.5, abs=1e-13)
    assert xi == pytest.approx(-0.25, abs=1e-13)
    assert hamiltonian(L, j) == pytest.approx(-0.125, abs=1e-13)


def test_classical_momenta():
    L = classical_lagrangian(PhysParams(hbar=1.0, mu=0.7, energy=0.0))
    j = Jet((0.0, 1.0, 0.3, -0.2, 0.1, 0.4))
    p, pi, xi = momenta(L, j)
    assert p == pytest.approx(0.7)
    assert pi == 0.0 and xi == 0.0
    assert hamiltonian(L, j) == pytest.approx(0.35)


def test_two_path_momenta_agree():
    """Legendre transform of the closed-form Lagrangian must reproduce the
    series momenta of the canonical lattice."""
    L = quantum_lagrangian(PARAMS)
    c = KineticCoefficients.canonical()
    rng = np.random.default_rng(31)
    for j in sample_jets(rng, 100):
        direct = momenta(L, j)
        viaseries = series_momenta(c, j, PARAMS)
        np.testing.assert_allclose(direct, viaseries, rtol=1e-11, atol=1e-12)


def test_series_lagrangian_matches_closed_form():
    Ls = series_lagrangian(KineticCoefficients.canonical(), PARAMS)
    Lq = quantum_lagrangian(PARAMS)
    j = Jet((0.4, 1.2, -0.3, 0.6, 0.2, -0.1, 0.3))
    assert Ls.value(j) == pytest.approx(Lq.value(j), rel=1e-13)
    assert el_residual(Ls, j) == pytest.approx(el_residual(Lq, j), rel=1e-10)


def test_lambda_term_enters_el_linearly():
    # the (lam/2) xddd^2 regulator adds exactly lam * x^(6) to the residual
    c = KineticCoefficients.canonical()
    j = Jet((0.4, 1.2, -0.3, 0.6, 0.2, -0.1, 0.75))
    base = el_residual(series_lagrangian(c, PARAMS, lam=0.0), j)
    for lam in [1e-2, 1e-4]:
        shifted = el_residual(series_lagrangian(c, PARAMS, lam=lam), j)
        assert shifted - base == pytest.approx(lam * 0.75, rel=1e-6)


# ---------------------------------------------------------------------------
# Canonical-structure consistency
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [0.5, 1e-3, 1e-6])
def test_canonical_consistency_canonical_lattice(lam):
    c = KineticCoefficients.canonical()
    rng = np.random.default_rng(7)
    worst = 0.0
    for j in sample_jets(rng, 25):
        report = canonical_consistency(c, j, PARAMS, lam)
        worst = max(worst, report.max_ratio)
    assert worst < 1e-12


def test_canonical_consistency_any_lattice():
    # the identities are structural: they hold for perturbed coefficients too
    c = KineticCoefficients.canonical().with_entry(2, 0, beta=0.0)
    j = sample_jets(np.random.default_rng(9), 1)[0]
    assert canonical_consistency(c, j, PARAMS, 1e-3).max_ratio < 1e-12


def test_canonical_consistency_with_potential():
    c = KineticCoefficients.canonical()
    j = sample_jets(np.random.default_rng(13), 1)[0]
    rep = canonical_consistency(c, j, PARAMS, 0.1,
                                potential=PotentialModel.harmonic(1.0))
    assert rep.max_ratio < 1e-12


def test_canonical_consistency_requires_positive_lambda():
    c = KineticCoefficients.canonical()
    j = sample_jets(np.random.default_rng(9), 1)[0]
    with pytest.raises(ValueError):
        canonical_consistency(c, j, PARAMS, 0.0)


def test_canonical_report_names_all_checks():
    c = KineticCoefficients.canonical()
    j = sample_jets(np.random.default_rng(9), 1)[0]
    text = canonical_consistency(c, j, PARAMS, 0.5).summary()
    for name in ["xddd_recovery", "pi_recovery", "p_recovery",
                 "gradient_balance"]:
        assert name in text


# ---------------------------------------------------------------------------
# Linear velocity term
# ---------------------------------------------------------------------------

def test_quadratic_exponent_is_consistent():
    rep = linear_term_demo(2, lambda x: 0.5, potential=PotentialModel.harmonic(1.0))
    assert rep.consistent
    assert rep.max_xdot_mismatch < 1e-12
    assert rep.max_pdot_mismatch < 1e-12


@pytest.mark.parametrize("i", [3, -2])
def test_other_exponents_consistent(i):
    rep = linear_term_demo(i, lambda x: 0.8, potential=PotentialModel.linear(0.3))
    assert rep.consistent
    assert rep.max_pdot_mismatch < 1e-10


def test_linear_exponent_breaks_naive_route():
    rep = linear_term_demo(1, lambda x: 1.0, potential=PotentialModel.linear(0.8))
    assert rep.naive_inconsistent is True
    assert rep.max_gradient == pytest.approx(0.8)


def test_linear_exponent_fixed_by_regulator():
    rep = linear_term_demo(1, lambda x: 1.0, potential=PotentialModel.linear(0.8),
                           lam=1e-3)
    assert rep.consistent
    assert rep.regularized_max_mismatch < 1e-10


def test_linear_exponent_flat_potential_is_vacuous():
    rep = linear_term_demo(1, lambda x: 1.0)
    assert rep.naive_inconsistent is False
    assert any("flat" in n or "vacuous" in n for n in rep.notes)


def test_degenerate_exponents_rejected():
    with pytest.raises(ValueError):
        linear_term_demo(0, lambda x: 1.0)
    with pytest.raises(ValueError):
        linear_term_demo(2, lambda x: 1.0, lam=-1.0)
    with pytest.raises(ValueError):
        linear_term_acceleration(1, lambda x: 1.0, PotentialModel.free(), 0.0, 1.0)


def test_linear_term_acceleration_quadratic_case():
    # L = f xd^2 - V: acceleration -V'/(2 f)
    acc = linear_term_acceleration(2, lambda x: 0.5, PotentialModel.linear(0.3),
                                   0.2, 1.1)
    assert acc == pytest.approx(-0.3)


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

@given(st.floats(0.3, 2.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
@settings(deadline=None, max_examples=60)
def test_h_plus_l_is_kinetic_square(xd, xdd, xddd):
    """H + L = mu xd^2 for the quantum Lagrangian at V = 0."""
    L = quantum_lagrangian(PARAMS)
    j = Jet((0.1, xd, xdd, xddd, 0.2, -0.1))
    total = hamiltonian(L, j) + L.value(j)
    assert total == pytest.approx(xd * xd, rel=1e-9, abs=1e-9)


@given(st.floats(0.3, 1.5), st.floats(-0.8, 0.8))
@settings(deadline=None, max_examples=40)
def test_hamiltonian_constant_along_free_flow(c0, x0):
    """Straight-line motion x = x0 + c0 t conserves H = mu c0^2 / 2... plus
    nothing else, since all higher derivatives vanish."""
    L = quantum_lagrangian(PARAMS)
    j = Jet((x0, c0, 0.0, 0.0, 0.0, 0.0))
    assert hamiltonian(L, j) == pytest.approx(0.5 * c0 * c0, rel=1e-12)
    assert el_residual(L, Jet((x0, c0) + (0.0,) * 5)) == pytest.approx(0.0, abs=1e-12)
