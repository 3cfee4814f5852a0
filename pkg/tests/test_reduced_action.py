"""Tests for the reduced action built on a solution pair.

The free pair with a = 1, b = 0 gives S0' = hbar k exactly (constant
momentum), and a = 2, b = 0 gives S0' = 2 hbar k / (1 + 3 sin^2 kx); both
are hand-derived closed forms used as oracles below.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmotion.reduced_action import (
    QuantumStateParams,
    StateParamError,
    WaveCoefficients,
    compensated_params,
    ds0_derivs,
    qshje_residual,
    s0_eval,
    s0p_jet,
    wavefunction,
)
from qmotion.schrodinger import PhysParams, PotentialModel, solve_pair


def free_pair(energy=0.5, hbar=1.0, mu=1.0, domain=(-8.0, 8.0)):
    return solve_pair(PotentialModel.free(),
                      PhysParams(hbar=hbar, mu=mu, energy=energy), domain)


def harmonic_pair():
    return solve_pair(PotentialModel.harmonic(1.0),
                      PhysParams(hbar=1.0, mu=1.0, energy=0.5),
                      (-3.0, 3.0), anchor=0.0)


# ---------------------------------------------------------------------------
# Parameter validation
# ---------------------------------------------------------------------------

def test_zero_a_rejected():
    with pytest.raises(StateParamError):
        QuantumStateParams(a=0.0, b=1.0)


def test_defaults():
    q = QuantumStateParams(a=1.5)
    assert q.b == 0.0 and q.kappa == 0.0


# ---------------------------------------------------------------------------
# S0' closed forms on the free pair
# ---------------------------------------------------------------------------

def test_unit_state_has_constant_momentum():
    pair = free_pair()  # k = 1
    q = QuantumStateParams(a=1.0)
    for x in np.linspace(-6.0, 6.0, 25):
        j = s0p_jet(pair, q, float(x), 2)
        assert j.value == pytest.approx(1.0, abs=1e-14)
        assert j.coeffs[1] == pytest.approx(0.0, abs=1e-13)
        assert j.coeffs[2] == pytest.approx(0.0, abs=1e-13)


def test_two_state_closed_form():
    pair = free_pair()
    q = QuantumStateParams(a=2.0)
    for x in [-1.1, 0.0, math.pi / 4, 2.0]:
        want = 2.0 / (1.0 + 3.0 * math.sin(x) ** 2)
        assert s0p_jet(pair, q, x, 0).value == pytest.approx(want, rel=1e-13)


def test_s0p_positive_and_periodic():
    pair = free_pair()
    q = QuantumStateParams(a=2.0, b=-0.7)
    vals = [s0p_jet(pair, q, float(x), 0).value
            for x in np.linspace(0.0, math.pi, 40)]
    assert min(vals) > 0.0
    assert s0p_jet(pair, q, 0.3 + math.pi, 0).value == pytest.approx(
        s0p_jet(pair, q, 0.3, 0).value, rel=1e-12)


def test_negative_a_flips_momentum_sign():
    pair = free_pair()
    plus = s0p_jet(pair, QuantumStateParams(a=2.0, b=0.4), 0.9, 0).value
    minus = s0p_jet(pair, QuantumStateParams(a=-2.0, b=-0.4), 0.9, 0).value
    assert minus == pytest.approx(-plus, rel=1e-13)


def test_s0p_jet_derivatives_match_quotient():
    # derivative coefficients of hbar a W / D must agree with a separately
    # composed quotient of jets
    pair = free_pair()
    q = QuantumStateParams(a=1.7, b=0.3)
    x = 0.8
    j = s0p_jet(pair, q, x, 3)
    h = 1e-5
    fd2 = (s0p_jet(pair, q, x + h, 0).value
           - s0p_jet(pair, q, x - h, 0).value) / (2 * h)
    assert j.coeffs[1] == pytest.approx(fd2, rel=1e-8)


# ---------------------------------------------------------------------------
# Reduced action values
# ---------------------------------------------------------------------------

def test_s0_linear_for_unit_state():
    pair = free_pair()
    q = QuantumStateParams(a=1.0)
    base = s0_eval(pair, q, 0.0)
    for x in [0.5, 2.0, -3.0]:
        assert s0_eval(pair, q, x) - base == pytest.approx(x, abs=1e-10)


def test_kappa_shifts_s0_by_constant():
    pair = free_pair()
    lo = s0_eval(pair, QuantumStateParams(a=2.0, b=0.1, kappa=0.0), 1.3)
    hi = s0_eval(pair, QuantumStateParams(a=2.0, b=0.1, kappa=2.5), 1.3)
    assert hi - lo == pytest.approx(2.5, abs=1e-12)


def test_s0_continuous_across_phi2_zero():
    # phi2 = cos x vanishes at pi/2; the arctan branch must not jump
    pair = free_pair()
    q = QuantumStateParams(a=2.0, b=0.3)
    eps = 1e-4
    below = s0_eval(pair, q, math.pi / 2 - eps)
    above = s0_eval(pair, q, math.pi / 2 + eps)
    assert above > below
    assert above - below < 1e-2


def test_s0_monotone_in_x():
    pair = free_pair()
    q = QuantumStateParams(a=1.4, b=-0.6)
    xs = np.linspace(-2.0, 2.0, 17)
    vals = [s0_eval(pair, q, float(x)) for x in xs]
    assert all(b > a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# Hamilton-Jacobi residual
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("a,b", [(1.0, 0.0), (2.0, 0.0), (0.7, -1.2), (-1.5, 0.4)])
def test_qshje_residual_free(a, b):
    pair = free_pair(energy=0.8)
    q = QuantumStateParams(a=a, b=b)
    for x in np.linspace(-5.0, 5.0, 21):
        assert qshje_residual(pair, q, float(x)) < 1e-12


def test_qshje_residual_harmonic():
    pair = harmonic_pair()
    q = QuantumStateParams(a=1.3, b=0.2)
    worst = max(qshje_residual(pair, q, float(x))
                for x in np.linspace(-2.5, 2.5, 21))
    assert worst < 1e-6


def test_qshje_residual_detects_wrong_energy():
    # evaluating the defect with a deliberately wrong E must not be small
    pair = free_pair(energy=0.5)
    q = QuantumStateParams(a=1.0)
    wrong = PhysParams(hbar=1.0, mu=1.0, energy=0.7)
    assert qshje_residual(pair, q, 1.0, params=wrong) > 1e-2


# ---------------------------------------------------------------------------
# Wave reconstruction
# ---------------------------------------------------------------------------

def test_wavefunction_solves_wave_equation():
    pair = free_pair()
    q = QuantumStateParams(a=2.0, b=0.5)
    wc = WaveCoefficients(alpha=1.0, beta=0.25j)
    for x in [-1.0, 0.2, 1.7]:
        _, resid = wavefunction(pair, q, wc, x)
        assert resid < 1e-9


def test_wavefunction_reduces_to_plane_wave():
    pair = free_pair()  # k = 1
    q = QuantumStateParams(a=1.0)
    wc = WaveCoefficients(alpha=1.0, beta=0.0)
    v0, _ = wavefunction(pair, q, wc, 0.0)
    v1, _ = wavefunction(pair, q, wc, 1.2)
    # pure e^{ix}: unit modulus ratio, phase advance = 1.2
    ratio = v1 / v0
    assert abs(ratio) == pytest.approx(1.0, abs=1e-12)
    assert math.atan2(ratio.imag, ratio.real) == pytest.approx(1.2, abs=1e-10)


# ---------------------------------------------------------------------------
# Re-anchoring on a different basis pair
# ---------------------------------------------------------------------------

def test_compensated_params_recovers_rotated_state():
    # Express the (a, b) state of the sin/cos pair on a rotated basis and
    # check the probe system reproduces the same S0' field.
    pair = free_pair()
    q = QuantumStateParams(a=1.8, b=-0.4)

    c, s = math.cos(0.6), math.sin(0.6)

    def theta01(x):
        p1, d1, p2, d2 = pair.eval01(x)
        return (c * p1 - s * p2, c * d1 - s * d2,
                s * p1 + c * p2, s * d1 + c * d2)

    def target(x):
        return s0p_jet(pair, q, x, 0).value

    a2, b2, defect = compensated_params(theta01, 1.0, target, [0.1, 0.7, 1.3])
    assert defect < 1e-9
    # the reproduced field must match at a point not used for fitting
    x = 2.1
    t1, _, t2, _ = theta01(x)
    t1a, t1da, t2a, t2da = theta01(0.0)
    wref = t2a * t1da - t1a * t2da
    d = (a2 * t1 + b2 * t2) ** 2 + t2 * t2
    assert 1.0 * a2 * wref / d == pytest.approx(target(x), rel=1e-9)


def test_compensated_params_needs_three_probes():
    with pytest.raises(StateParamError):
        compensated_params(lambda x: (0, 0, 1, 0), 1.0, lambda x: 1.0, [0.0, 1.0])


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

@given(st.floats(0.5, 2.5), st.floats(-1.5, 1.5), st.floats(-2.0, 2.0))
@settings(deadline=None, max_examples=60)
def test_qshje_residual_property(a, b, x):
    """The defect stays at rounding level across the whole state family."""
    pair = free_pair()
    q = QuantumStateParams(a=a, b=b)
    assert qshje_residual(pair, q, x) < 1e-11
