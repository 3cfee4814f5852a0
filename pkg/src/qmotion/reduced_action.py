"""The reduced action built from a real solution pair.

Given two independent real wave solutions (phi1, phi2) with constant
Wronskian W, the one-parameter family of reduced actions is

    S0(x) = hbar * arctan(a * phi1/phi2 + b) + hbar * kappa,      a != 0,

whose spatial derivative has the closed form

    S0' = hbar * a * W / D,     D = (a*phi1 + b*phi2)^2 + phi2^2 > 0.

D is a sum of squares that never vanishes for admissible parameters, so S0'
keeps one sign (that of a*W) and S0 is strictly monotone: the arctan branch
jumps at zeros of phi2 are resolved by integrating S0' from the anchor and
attaching the principal value there.  All higher derivatives of S0 are
evaluated through jet arithmetic on the pair's derivative stacks, which the
wave equation supplies exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .jets import Jet, exp as jexp, sqrt as jsqrt
from .schrodinger import PhysParams, SolutionPair, eval_phi

__all__ = [
    "QuantumStateParams",
    "WaveCoefficients",
    "StateParamError",
    "s0_eval",
    "s0p_jet",
    "ds0_derivs",
    "qshje_residual",
    "wavefunction",
    "compensated_params",
]


class StateParamError(ValueError):
    """Inadmissible reduced-action parameters."""


@dataclass(frozen=True)
class QuantumStateParams:
    """Parameters (a, b, kappa) selecting one reduced action of the family.

    ``kappa`` shifts S0 by a constant and never influences dynamics.
    """

    a: float
    b: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.kappa)):
            raise StateParamError("state parameters must be finite")
        if self.a == 0:
            raise StateParamError("parameter a must be nonzero")


@dataclass(frozen=True)
class WaveCoefficients:
    """Complex weights of the two phase branches of the wave function."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        if self.alpha == 0 and self.beta == 0:
            raise StateParamError("alpha and beta cannot both vanish")


def _denominator_jet(pair: SolutionPair, q: QuantumStateParams, x: float,
                     order: int) -> Jet:
    j1, j2 = pair.phi_jets(x, order)
    lin = q.a * j1 + q.b * j2
    return lin * lin + j2 * j2


def s0p_jet(pair: SolutionPair, q: QuantumStateParams, x: float, order: int) -> Jet:
    """Spatial jet of S0' at x: coefficients (S0', S0'', ..., S0^(order+1))."""
    dj = _denominator_jet(pair, q, x, order)
    return (pair.params.hbar * q.a * pair.wronskian_ref) / dj


def ds0_derivs(pair: SolutionPair, q: QuantumStateParams, x: float):
    """(S0', S0'', S0''') at x."""
    return s0p_jet(pair, q, x, 2).coeffs


def s0_eval(pair: SolutionPair, q: QuantumStateParams, x: float) -> float:
    """Branch-unwrapped reduced action at x.

    Integrates S0' from the pair's anchor and adds the principal arctan
    value there plus the constant hbar*kappa, so the result is continuous
    and strictly monotone across zeros of phi2.
    """
    p1a, _, p2a, _ = pair.eval01(pair.anchor)
    if p2a == 0:
        raise StateParamError("anchor sits on a zero of phi2; move the anchor")
    base = pair.params.hbar * (math.atan(q.a * p1a / p2a + q.b) + q.kappa)
    if x == pair.anchor:
        return base

    def s0p(u: float) -> float:
        return float(s0p_jet(pair, q, u, 0).value)

    val, err = quad(s0p, pair.anchor, x, epsabs=1e-13, epsrel=1e-12, limit=400)
    return base + val


def qshje_residual(pair: SolutionPair, q: QuantumStateParams, x: float,
                   params: PhysParams | None = None) -> float:
    """Scaled defect of the stationary quantum Hamilton-Jacobi equation.

    Evaluates (S0')^2/(2 mu) + V - E - (hbar^2/4 mu) * ((3/2)(S0''/S0')^2
    - S0'''/S0'), normalized by |E| + |V| + (S0')^2/(2 mu).
    """
    params = params or pair.params
    s1, s2, s3 = ds0_derivs(pair, q, x)
    v = pair.potential.value(x)
    kin = s1 * s1 / (2.0 * params.mu)
    quant = (params.hbar**2 / (4.0 * params.mu)) * (
        1.5 * (s2 / s1) ** 2 - s3 / s1
    )
    resid = kin + v - params.energy - quant
    scale = abs(params.energy) + abs(v) + kin
    return abs(resid) / max(scale, 1e-300)


def wavefunction(pair: SolutionPair, q: QuantumStateParams,
                 wc: WaveCoefficients, x: float):
    """Wave value (S0')^(-1/2) (alpha e^{i S0/hbar} + beta e^{-i S0/hbar})
    and its scaled wave-equation residual at x.

    When a*W < 0 the prefactor uses |S0'|^(-1/2); the overall sign
    convention is absorbed into alpha, beta.
    """
    hbar = pair.params.hbar
    s0 = s0_eval(pair, q, x)
    sj = s0p_jet(pair, q, x, 2)  # (S0', S0'', S0''')
    s0_jet = Jet((s0 + 0j,) + tuple(complex(c) for c in sj.coeffs))  # order 3
    sp_jet = Jet(tuple(complex(c) for c in sj.coeffs))  # order 2
    sign = 1.0 if sj.value.real >= 0 else -1.0
    amp = 1.0 / jsqrt(sign * sp_jet)
    phase = jexp(1j * s0_jet / hbar)
    psi = amp * (wc.alpha * phase + wc.beta / phase)
    value, _, second = psi.coeffs[0], psi.coeffs[1], psi.coeffs[2]
    f = pair.params.kratio * (pair.potential.value(x) - pair.params.energy)
    resid = abs(second - f * value) / (1.0 + abs(f * value))
    return value, resid


def compensated_params(theta01, hbar: float, s0p_target, probes) -> tuple:
    """Re-anchor state parameters on a different basis pair.

    ``theta01(x)`` returns (theta1, theta1', theta2, theta2') of the new
    pair; ``s0p_target(x)`` returns the S0' values to reproduce.  Matching
    at three probe points turns the denominator expansion into a linear
    system for (a, 2b, (b^2+1)/a); the returned triple is (a, b, defect)
    where the defect measures how well the quadratic constraint closes.
    """
    xs = list(probes)
    if len(xs) < 3:
        raise StateParamError("need at least three probe points")
    rows, rhs = [], []
    t1v, t1d, t2v, t2d = theta01(xs[0])
    wref = t2v * t1d - t1v * t2d
    for x in xs[:3]:
        t1, _, t2, _ = theta01(x)
        rows.append([t1 * t1, t1 * t2, t2 * t2])
        rhs.append(hbar * wref / s0p_target(x))
    sol = np.linalg.solve(np.asarray(rows), np.asarray(rhs))
    a_new = sol[0]
    if a_new == 0:
        raise StateParamError("degenerate probe system: new a vanishes")
    b_new = 0.5 * sol[1]
    defect = abs(sol[2] * a_new - (b_new**2 + 1.0)) / (b_new**2 + 1.0)
    return a_new, b_new, defect
