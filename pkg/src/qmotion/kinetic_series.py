"""hbar-graded series machinery for third-order kinetic Lagrangians.

The kinetic term is modeled as a double series over levels n (powers of
hbar) and spatial weights k,

    T = sum_{n,k} (hbar^n / mu^(n-1)) [ alpha_nk x^k xdd^(n+k) / xd^(3n+2k-2)
                                  + beta_nk x^k xdd^(n+k-2) xddd / xd^(3n+2k-3) ],

with the convention that any factor carrying exponent zero is skipped
(0^0 = 1), so entries with n+k = 2 never divide by xdd.  On top of T the
module provides: the regularized Lagrangian T + (lam/2) xddd^2 - V, the
three conjugate momenta of the third-order formalism in closed form, the
action-gradient series dS0/dx together with its second and third spatial
derivatives, the master identity tying these to the quantum stationary
Hamilton-Jacobi equation, and a sampling-based elimination that recovers
the unique physical coefficient values level by level.

All evaluators are generic over the numeric type of the state entries
(floats, complex numbers, jets, dual numbers), which is what lets the
master identity be graded by hbar: passing a jet in hbar separates the
residual into per-level components.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .jets import Dual, Jet

__all__ = [
    "SingularityError",
    "LatticeError",
    "DeterminationError",
    "KineticCoefficients",
    "ABTables",
    "Momenta",
    "eval_kinetic",
    "kinetic_term",
    "eval_lagrangian_series",
    "series_momenta",
    "momenta_state",
    "ab_tables",
    "ds0dx_series",
    "ds0dx_state",
    "master_residual",
    "level_residuals",
    "term_exponents",
    "sample_jets",
    "sample_states",
    "determine_coefficients",
    "LevelReport",
    "DeterminationReport",
]


class SingularityError(ZeroDivisionError):
    """A state component sits on the singular locus (xd = 0, or xdd = 0
    while a negative xdd power is required)."""


class LatticeError(ValueError):
    """Malformed coefficient lattice."""


class DeterminationError(RuntimeError):
    """The sampled elimination could not certify a unique solution."""


# ---------------------------------------------------------------------------
# generic monomial evaluation

def _lead(v):
    """Leading numeric value of a float/Jet/Dual, for singularity checks."""
    while True:
        if isinstance(v, Jet):
            v = v.value
        elif isinstance(v, Dual):
            v = v.re
        else:
            return v


def _ipow(base, e: int):
    """base**e for integer e with the 0^0 = 1 skip convention."""
    if e == 0:
        return 1
    if e < 0 and _lead(base) == 0:
        raise SingularityError("negative power of a vanishing state component")
    return base ** e


def _mono(xs, xd, xdd, xddd, x4, x5, kx, e2, ed, e3=0, e4=0, e5=0):
    """x^kx * xdd^e2 * xd^ed * xddd^e3 * x4^e4 * x5^e5 (ed usually < 0)."""
    val = _ipow(xd, ed)
    if kx:
        val = val * _ipow(xs, kx)
    if e2:
        val = val * _ipow(xdd, e2)
    if e3:
        val = val * _ipow(xddd, e3)
    if e4:
        val = val * _ipow(x4, e4)
    if e5:
        val = val * _ipow(x5, e5)
    return val


def _prefactor(mu, hbar, n: int):
    """hbar^n / mu^(n-1) with exponent-zero skips (classical level keeps a
    bare mu and no hbar factor, so hbar = 0 is admissible)."""
    val = _ipow(mu, 1 - n)
    if n:
        val = _ipow(hbar, n) * val
    return val


# ---------------------------------------------------------------------------
# coefficient lattice

class KineticCoefficients:
    """Sparse lattice (n, k) -> (alpha, beta), n >= 0, k >= 0.

    ``x0`` shifts the spatial weight factors to (x - x0)^k; the physical
    solution carries no explicit x dependence, so the offset is inert for
    it but kept for generality.
    """

    def __init__(self, entries: dict | None = None, x0: float = 0.0):
        clean: dict[tuple[int, int], tuple[float, float]] = {}
        for key, val in (entries or {}).items():
            n, k = key
            if n < 0 or k < 0 or n != int(n) or k != int(k):
                raise LatticeError(f"invalid lattice index {key!r}")
            al, be = float(val[0]), float(val[1])
            if al != 0.0 or be != 0.0:
                clean[(int(n), int(k))] = (al, be)
        self.entries = clean
        self.x0 = float(x0)

    @classmethod
    def canonical(cls) -> "KineticCoefficients":
        return cls({(0, 0): (0.5, 0.0), (2, 0): (0.625, -0.25)})

    @property
    def n_max(self) -> int:
        return max((n for n, _ in self.entries), default=0)

    @property
    def k_max(self) -> int:
        return max((k for _, k in self.entries), default=0)

    def alpha(self, n: int, k: int) -> float:
        return self.entries.get((n, k), (0.0, 0.0))[0]

    def beta(self, n: int, k: int) -> float:
        return self.entries.get((n, k), (0.0, 0.0))[1]

    def with_entry(self, n: int, k: int, alpha: float | None = None,
                   beta: float | None = None) -> "KineticCoefficients":
        """Copy with one lattice point replaced (None keeps the old value)."""
        new = dict(self.entries)
        old = new.get((n, k), (0.0, 0.0))
        new[(n, k)] = (old[0] if alpha is None else alpha,
                       old[1] if beta is None else beta)
        return KineticCoefficients(new, self.x0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KineticCoefficients):
            return NotImplemented
        return self.entries == other.entries and self.x0 == other.x0

    def __repr__(self) -> str:
        cells = ", ".join(
            f"({n},{k}): a={a:g}, b={b:g}"
            for (n, k), (a, b) in sorted(self.entries.items())
        )
        return f"KineticCoefficients({{{cells}}}, x0={self.x0:g})"

    def to_json(self) -> str:
        doc = {
            "entries": [
                {"n": n, "k": k, "alpha": a, "beta": b}
                for (n, k), (a, b) in sorted(self.entries.items())
            ]
        }
        if self.x0:
            doc["x0"] = self.x0
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "KineticCoefficients":
        doc = json.loads(text)
        if not isinstance(doc, dict) or "entries" not in doc:
            raise LatticeError("expected an object with an 'entries' list")
        entries = {}
        for cell in doc["entries"]:
            try:
                key = (int(cell["n"]), int(cell["k"]))
                entries[key] = (float(cell.get("alpha", 0.0)),
                                float(cell.get("beta", 0.0)))
            except (KeyError, TypeError, ValueError) as exc:
                raise LatticeError(f"bad lattice cell {cell!r}") from exc
        return cls(entries, float(doc.get("x0", 0.0)))


def term_exponents(n: int, k: int) -> dict:
    """Exponent bookkeeping of the two monomials at lattice point (n, k)."""
    return {
        "alpha": {"x": k, "xdd": n + k, "xd": -(3 * n + 2 * k - 2), "xddd": 0},
        "beta": {"x": k, "xdd": n + k - 2, "xd": -(3 * n + 2 * k - 3), "xddd": 1},
    }


# ---------------------------------------------------------------------------
# derived coefficient tables

@dataclass(frozen=True)
class ABTables:
    """Coefficients of the dS0/dx series induced by a kinetic lattice."""

    A: dict = field(default_factory=dict)
    B: dict = field(default_factory=dict)
    n_max: int = 0
    k_max: int = 0

    def a(self, n: int, k: int) -> float:
        return self.A.get((n, k), 0.0)

    def b(self, n: int, k: int) -> float:
        return self.B.get((n, k), 0.0)


def ab_tables(c: KineticCoefficients) -> ABTables:
    """A/B coefficient tables of the action-gradient series.

    Each pair (A_nk, B_nk) collapses the momentum combination
    P + Pi*xdd/xd + Xi*xddd/xd into two monomial families per lattice
    point; the canonical lattice yields A_00 = 1 and nothing else.
    """
    A, B = {}, {}
    for n in range(c.n_max + 1):
        for k in range(c.k_max + 1):
            a_nk = (
                (3 * n * n + 2 * k * k + 5 * n * k - 4 * n - 3 * k + 2) * c.alpha(n, k)
                + (3 * n + 2 * k - 1) * (3 * n + 2 * k - 3) * c.beta(n, k)
                - (k + 1) * (n + k + 1) * c.alpha(n, k + 1)
                - 2 * (k + 1) * (3 * n + 2 * k - 1) * c.beta(n, k + 1)
                + (k + 1) * (k + 2) * c.beta(n, k + 2)
            )
            b_nk = (
                -(n + k) * (n + k - 1) * c.alpha(n, k)
                - (3 * n * n + 2 * k * k + 5 * n * k - 3 * n - 3 * k - 1) * c.beta(n, k)
                + (k + 1) * (n + k - 1) * c.beta(n, k + 1)
            )
            if a_nk:
                A[(n, k)] = a_nk
            if b_nk:
                B[(n, k)] = b_nk
    return ABTables(A, B, c.n_max, c.k_max)


# ---------------------------------------------------------------------------
# kinetic term and Lagrangian

def kinetic_term(c: KineticCoefficients, x, xd, xdd, xddd, mu, hbar):
    """T evaluated on generic state components (floats, jets, duals)."""
    if _lead(xd) == 0:
        raise SingularityError("xd = 0 in kinetic series")
    xs = x - c.x0
    total = 0.0
    for (n, k), (al, be) in sorted(c.entries.items()):
        pref = _prefactor(mu, hbar, n)
        if al:
            total = total + al * pref * _mono(
                xs, xd, xdd, xddd, None, None, k, n + k, -(3 * n + 2 * k - 2))
        if be:
            total = total + be * pref * _mono(
                xs, xd, xdd, xddd, None, None, k, n + k - 2, -(3 * n + 2 * k - 3), 1)
    return total


def _state_from_jet(j: Jet, need: int) -> tuple:
    if j.order + 1 < need:
        raise LatticeError(
            f"jet carries {j.order + 1} derivatives, need at least {need}")
    coeffs = j.coeffs + (0.0,) * (6 - len(j.coeffs))
    return coeffs[:6]


def eval_kinetic(c: KineticCoefficients, j: Jet, params, *, hbar=None):
    """T at a motion jet (x, xd, xdd, xddd, ...); order >= 3 required.

    ``hbar`` overrides params.hbar; it may be a plain number (0 recovers
    the classical limit mu*xd^2/2 for the canonical lattice) or a Jet for
    level-graded evaluation.
    """
    x, xd, xdd, xddd, _, _ = _state_from_jet(j, 4)
    hb = params.hbar if hbar is None else hbar
    return kinetic_term(c, x, xd, xdd, xddd, params.mu, hb)


def eval_lagrangian_series(c: KineticCoefficients, j: Jet, params, lam: float,
                           potential, x=None, *, hbar=None):
    """T + (lam/2) xddd^2 - V(x) at a motion jet."""
    xj, xd, xdd, xddd, _, _ = _state_from_jet(j, 4)
    if x is None:
        x = xj
    hb = params.hbar if hbar is None else hbar
    val = kinetic_term(c, xj, xd, xdd, xddd, params.mu, hb)
    if lam:
        val = val + 0.5 * lam * xddd * xddd
    vfun = getattr(potential, "value", potential)
    return val - vfun(x)


# ---------------------------------------------------------------------------
# conjugate momenta (closed-form series)

class Momenta(NamedTuple):
    P: float
    Pi: float
    Xi: float


def momenta_state(c: KineticCoefficients, state, mu, hbar, lam=0.0) -> Momenta:
    """Closed-form (P, Pi, Xi) from the full state (x .. x5).

    P collects, per lattice point, the bracketed combinations of alpha and
    beta entries (including the two neighbor columns k+1, k+2) in front of
    the same two monomial families as T but with one extra power of xd in
    the denominator; Pi and Xi follow the analogous single-bracket sums.
    The regulator adds lam*x5 to P, -lam*x4 to Pi and lam*xddd to Xi.
    """
    x, xd, xdd, xddd, x4, x5 = state
    if _lead(xd) == 0:
        raise SingularityError("xd = 0 in momentum series")
    xs = x - c.x0
    p_tot, pi_tot, xi_tot = 0.0, 0.0, 0.0
    for n in range(c.n_max + 1):
        for k in range(c.k_max + 1):
            al, be = c.alpha(n, k), c.beta(n, k)
            al1, be1 = c.alpha(n, k + 1), c.beta(n, k + 1)
            be2 = c.beta(n, k + 2)
            if not any((al, be, al1, be1, be2)):
                continue
            pref = _prefactor(mu, hbar, n)
            pa = (
                (3 * n + 2 * k - 2) * (n + k - 1) * al
                + (3 * n + 2 * k - 2) * (3 * n + 2 * k - 3) * be
                - (k + 1) * (n + k + 1) * al1
                - (k + 1) * (6 * n + 4 * k - 3) * be1
                + (k + 1) * (k + 2) * be2
            )
            pb = (
                -(n + k) * (n + k - 1) * al
                - (n + k) * (3 * n + 2 * k - 3) * be
                + (k + 1) * (n + k - 1) * be1
            )
            pi_c = (n + k) * al + (3 * n + 2 * k - 3) * be - (k + 1) * be1
            if pa:
                p_tot = p_tot + pa * pref * _mono(
                    xs, xd, xdd, xddd, x4, x5, k, n + k, -(3 * n + 2 * k - 1))
            if pb:
                p_tot = p_tot + pb * pref * _mono(
                    xs, xd, xdd, xddd, x4, x5, k, n + k - 2, -(3 * n + 2 * k - 2), 1)
            if pi_c:
                pi_tot = pi_tot + pi_c * pref * _mono(
                    xs, xd, xdd, xddd, x4, x5, k, n + k - 1, -(3 * n + 2 * k - 2))
            if be:
                xi_tot = xi_tot + be * pref * _mono(
                    xs, xd, xdd, xddd, x4, x5, k, n + k - 2, -(3 * n + 2 * k - 3))
    if lam:
        p_tot = p_tot + lam * x5
        pi_tot = pi_tot - lam * x4
        xi_tot = xi_tot + lam * xddd
    return Momenta(p_tot, pi_tot, xi_tot)


def series_momenta(c: KineticCoefficients, j: Jet, params, lam: float = 0.0,
                   *, hbar=None) -> Momenta:
    """(P, Pi, Xi) at a motion jet of order >= 5."""
    state = _state_from_jet(j, 6)
    hb = params.hbar if hbar is None else hbar
    return momenta_state(c, state, params.mu, hb, lam)


def xi_series_core(c: KineticCoefficients, state, mu, hbar):
    """The bare beta sum appearing in Xi and in the regulated Hamiltonian
    bracket: sum hbar^n beta_nk / mu^(n-1) x^k xdd^(n+k-2) / xd^(3n+2k-3)."""
    x, xd, xdd = state[0], state[1], state[2]
    xs = x - c.x0
    total = 0.0
    for (n, k), (_, be) in sorted(c.entries.items()):
        if be:
            total = total + be * _prefactor(mu, hbar, n) * _mono(
                xs, xd, xdd, None, None, None, k, n + k - 2, -(3 * n + 2 * k - 3))
    return total


# ---------------------------------------------------------------------------
# action-gradient series dS0/dx and its derivatives

def ds0dx_state(c: KineticCoefficients, state, mu, hbar):
    """(S0', S0'', S0''') as phase-space functions of the state (x .. x5).

    S0' sums the A/B families; the second and third derivatives follow by
    spatial differentiation d/dx = (d/dt)/xd, which fans each family out
    into the fixed combinations of neighbor-column A/B coefficients coded
    below.  Canonically these collapse to mu*xd, mu*xdd/xd and
    mu*(xddd*xd - xdd^2)/xd^3.
    """
    x, xd, xdd, xddd, x4, x5 = state
    if _lead(xd) == 0:
        raise SingularityError("xd = 0 in action-gradient series")
    xs = x - c.x0
    t = ab_tables(c)
    s1, s2, s3 = 0.0, 0.0, 0.0

    def m(kx, e2, ed, e3=0, e4=0, e5=0):
        return _mono(xs, xd, xdd, xddd, x4, x5, kx, e2, ed, e3, e4, e5)

    for n in range(t.n_max + 1):
        for k in range(t.k_max + 1):
            a, b = t.a(n, k), t.b(n, k)
            a1, b1 = t.a(n, k + 1), t.b(n, k + 1)
            a2, b2 = t.a(n, k + 2), t.b(n, k + 2)
            if not any((a, b, a1, b1, a2, b2)):
                continue
            pref = _prefactor(mu, hbar, n)
            q = 3 * n + 2 * k
            # first derivative: two families
            if a:
                s1 = s1 + pref * a * m(k, n + k, -(q - 1))
            if b:
                s1 = s1 + pref * b * m(k, n + k - 2, -(q - 2), 1)
            # second derivative: four families
            c1 = (k + 1) * a1 - (q - 1) * a
            c2 = (n + k) * a - (q - 2) * b + (k + 1) * b1
            if c1:
                s2 = s2 + pref * c1 * m(k, n + k + 1, -(q + 1))
            if c2:
                s2 = s2 + pref * c2 * m(k, n + k - 1, -q, 1)
            if b:
                s2 = s2 + pref * (n + k - 2) * b * m(k, n + k - 3, -(q - 1), 2)
                s2 = s2 + pref * b * m(k, n + k - 2, -(q - 1), 0, 1)
            # third derivative: seven families
            d1 = ((q - 1) * (q + 1) * a - 2 * (k + 1) * (q + 1) * a1
                  + (k + 1) * (k + 2) * a2)
            d2 = (-(6 * n * n + 4 * k * k + 10 * n * k + 2 * n + k - 1) * a
                  + q * (q - 2) * b + 2 * (k + 1) * (n + k + 1) * a1
                  - 2 * (k + 1) * q * b1 + (k + 1) * (k + 2) * b2)
            d3 = ((n + k) * (n + k - 1) * a
                  - (6 * n * n + 4 * k * k + 10 * n * k - 12 * n - 9 * k + 4) * b
                  + 2 * (k + 1) * (n + k - 1) * b1)
            d5 = (n + k) * a - (6 * n + 4 * k - 3) * b + 2 * (k + 1) * b1
            if d1:
                s3 = s3 + pref * d1 * m(k, n + k + 2, -(q + 3))
            if d2:
                s3 = s3 + pref * d2 * m(k, n + k, -(q + 2), 1)
            if d3:
                s3 = s3 + pref * d3 * m(k, n + k - 2, -(q + 1), 2)
            if d5:
                s3 = s3 + pref * d5 * m(k, n + k - 1, -(q + 1), 0, 1)
            if b:
                s3 = s3 + pref * (n + k - 2) * (n + k - 3) * b * m(k, n + k - 4, -q, 3)
                s3 = s3 + pref * 3 * (n + k - 2) * b * m(k, n + k - 3, -q, 1, 1)
                s3 = s3 + pref * b * m(k, n + k - 2, -q, 0, 0, 1)
    return s1, s2, s3


def ds0dx_series(c: KineticCoefficients, j: Jet, params, *, hbar=None):
    """(S0', S0'', S0''') at a motion jet of order >= 5."""
    state = _state_from_jet(j, 6)
    hb = params.hbar if hbar is None else hbar
    return ds0dx_state(c, state, params.mu, hb)


# ---------------------------------------------------------------------------
# master identity

def _taylor_of(v, m: int):
    if isinstance(v, Jet):
        return v.taylor(m)
    return v if m == 0 else 0.0


def level_residuals(c: KineticCoefficients, state, mu, hbar, order: int | None = None):
    """Per-hbar-level scaled residuals of the master identity.

    The identity reads

        xd*S0'^3 - S0'^4/(2 mu) + (hbar^2/4 mu)[(3/2) S0''^2 - S0' S0''']
            = S0'^2 * T.

    hbar is promoted to a jet variable so every additive piece splits into
    level components; level m's residual is scaled by the largest piece
    magnitude at that level, which keeps the measure meaningful both where
    the classical terms dominate and deep in the quantum tail.
    Returns (ratios, residuals, scales) indexed by level.
    """
    if order is None:
        order = 2 * c.n_max + 2
    hb = Jet((0.0, float(hbar)) + (0.0,) * (order - 1))
    s1, s2, s3 = ds0dx_state(c, state, mu, hb)
    t_val = kinetic_term(c, state[0], state[1], state[2], state[3], mu, hb)
    xd = state[1]
    pieces = [
        xd * s1 ** 3,
        -(s1 ** 4) / (2.0 * mu),
        (hb * hb) * 0.375 / mu * s2 * s2,
        -(hb * hb) * 0.25 / mu * s1 * s3,
        -(s1 * s1 * t_val),
    ]
    ratios = np.zeros(order + 1)
    residuals = np.zeros(order + 1)
    scales = np.zeros(order + 1)
    for m in range(order + 1):
        vals = [_taylor_of(p, m) for p in pieces]
        resid = abs(sum(vals))
        scale = max(abs(v) for v in vals)
        residuals[m] = resid
        scales[m] = scale
        ratios[m] = resid / scale if scale > 0.0 else 0.0
    return ratios, residuals, scales


def master_residual(c: KineticCoefficients, j: Jet, params, *, hbar=None) -> float:
    """Worst per-level scaled residual of the master identity at a jet."""
    state = _state_from_jet(j, 6)
    hb = params.hbar if hbar is None else hbar
    ratios, _, _ = level_residuals(c, state, params.mu, hb)
    return float(np.max(ratios))


# ---------------------------------------------------------------------------
# samplers

def sample_jets(rng: np.random.Generator, count: int, order: int = 5) -> list[Jet]:
    """Random motion jets with xd bounded away from zero.

    xd is uniform on +-[0.5, 2]; all other components uniform on [-1, 1].
    """
    out = []
    for _ in range(count):
        coeffs = rng.uniform(-1.0, 1.0, order + 1)
        coeffs[1] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
        out.append(Jet(tuple(coeffs)))
    return out


def sample_states(rng: np.random.Generator, count: int) -> np.ndarray:
    """States for the coefficient elimination: x, xd and xdd all bounded
    away from zero (they enter solo monomial columns, some with negative
    xdd exponents), higher components uniform on [-1, 1]."""
    states = rng.uniform(-1.0, 1.0, (count, 6))
    for col in (0, 1, 2):
        states[:, col] = (rng.choice([-1.0, 1.0], count)
                          * rng.uniform(0.5, 2.0, count))
    return states


# ---------------------------------------------------------------------------
# level-by-level coefficient determination

@dataclass
class LevelReport:
    level: int
    labels: list
    values: dict
    rank: int
    n_unknowns: int
    fit_residual: float
    roots: list = field(default_factory=list)
    selected_root: float | None = None
    notes: list = field(default_factory=list)
    ok: bool = True


@dataclass
class DeterminationReport:
    levels: list
    coefficients: KineticCoefficients
    unique: bool

    def summary(self) -> str:
        lines = []
        for rep in self.levels:
            head = f"level {rep.level}: rank {rep.rank}/{rep.n_unknowns}, " \
                   f"fit residual {rep.fit_residual:.2e}"
            lines.append(head)
            nonzero = {lab: v for lab, v in rep.values.items() if v != 0.0}
            if nonzero:
                lines.append("  solved: " + ", ".join(
                    f"{lab}={v:g}" for lab, v in sorted(nonzero.items())))
            else:
                lines.append("  solved: all zero")
            if rep.roots:
                lines.append(
                    f"  quadratic roots {sorted(rep.roots)}; "
                    f"selected {rep.selected_root:g} (nonzero root keeps the "
                    "classical kinetic term)")
            for note in rep.notes:
                lines.append("  " + note)
        lines.append("unique: " + ("yes" if self.unique else "NO"))
        return "\n".join(lines)


def _snap(v: float, tol: float = 1e-9, max_den: int = 16) -> float:
    frac = Fraction(v).limit_denominator(max_den)
    return float(frac) if abs(v - float(frac)) <= tol else v


def _level_lattice(values: dict, n: int, k_max: int, base: KineticCoefficients):
    entries = dict(base.entries)
    for k in range(k_max + 1):
        al = values.get(("alpha", k), 0.0)
        be = values.get(("beta", k), 0.0)
        if al or be:
            entries[(n, k)] = (al, be)
    return KineticCoefficients(entries)


def _classical_s1(theta: np.ndarray, k_max: int, state, mu: float) -> float:
    """S0' of a pure level-0 lattice (hbar never enters)."""
    c = _theta_lattice(theta, 0, k_max)
    s1, _, _ = ds0dx_state(c, state, mu, 0.0)
    return s1


def _theta_lattice(theta: np.ndarray, n: int, k_max: int,
                   base: KineticCoefficients | None = None) -> KineticCoefficients:
    entries = dict(base.entries) if base is not None else {}
    for k in range(k_max + 1):
        al, be = theta[k], theta[k_max + 1 + k]
        if al or be:
            entries[(n, k)] = (al, be)
    return KineticCoefficients(entries)


def _nullspace(mat: np.ndarray, rel_tol: float = 1e-9):
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rel_tol * max(smax, 1.0)))
    return vt[rank:].T, rank


def _determine_level0(rng, k_max: int, samples: int, sampler):
    """Classical-level elimination on the divided form of the master identity.

    R(theta; state) = xd*S0'(theta) - S0'(theta)^2/(2 mu) - T(theta) must
    vanish for every state.  Three stages: (a) the xddd slope of S0' has to
    vanish (kills the B column of the induced gradient series), (b) on that
    subspace the xddd slope of R kills the beta entries, (c) the surviving
    two-dimensional family (alpha_00, alpha_01) is resolved by reconstructing
    R's weights on the three residual monomials xd^2, x*xdd, x^2 xdd^2/xd^2
    as exact quadratics in the two unknowns.
    """
    mu = 1.0
    n_unk = 2 * (k_max + 1)
    states = sampler(rng, samples)
    labels = ([("alpha", k) for k in range(k_max + 1)]
              + [("beta", k) for k in range(k_max + 1)])

    def s1_of(theta, st):
        return _classical_s1(theta, k_max, st, mu)

    def resid(theta, st):
        c = _theta_lattice(theta, 0, k_max)
        s1 = ds0dx_state(c, st, mu, 0.0)[0]
        t_val = kinetic_term(c, st[0], st[1], st[2], st[3], mu, 0.0)
        return st[1] * s1 - s1 * s1 / (2.0 * mu) - t_val

    def with_xddd(st, v):
        out = list(st)
        out[3] = v
        return out

    # stage (a): xddd slope of S0' is linear in theta; exact central diff
    basis = np.eye(n_unk)
    mat_a = np.empty((samples, n_unk))
    for i, st in enumerate(states):
        for l in range(n_unk):
            mat_a[i, l] = 0.5 * (s1_of(basis[l], with_xddd(st, 1.0))
                                 - s1_of(basis[l], with_xddd(st, -1.0)))
    null_a, rank_a = _nullspace(mat_a)
    if null_a.shape[1] != k_max + 1:
        raise DeterminationError(
            f"stage (a) nullspace dimension {null_a.shape[1]}, "
            f"expected {k_max + 1}")

    # stage (b): on the stage-(a) subspace S0' carries no xddd, so the xddd
    # slope of R is again linear in theta
    mat_b = np.empty((samples, null_a.shape[1]))
    for i, st in enumerate(states):
        for l in range(null_a.shape[1]):
            mat_b[i, l] = 0.5 * (resid(null_a[:, l], with_xddd(st, 1.0))
                                 - resid(null_a[:, l], with_xddd(st, -1.0)))
    null_b, rank_b = _nullspace(mat_b)
    surv = null_a @ null_b
    if surv.shape[1] != 2:
        raise DeterminationError(
            f"surviving family dimension {surv.shape[1]}, expected 2")
    # the surviving family must be exactly the (alpha_00, alpha_01) plane
    leak = surv.copy()
    leak[0, :] = 0.0
    leak[1, :] = 0.0
    if np.max(np.abs(leak)) > 1e-8:
        raise DeterminationError("surviving family is not the "
                                 "(alpha_00, alpha_01) plane")

    # stage (c): reconstruct the residual weights on the three monomials
    probes = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.0),
              (0.0, 2.0)]
    design = np.empty((samples, 3))
    for i, st in enumerate(states):
        x, xd, xdd = st[0], st[1], st[2]
        design[i] = (xd * xd, x * xdd, (x * xdd / xd) ** 2)
    weights = np.empty((len(probes), 3))
    fit_res = 0.0
    for p, (s, u) in enumerate(probes):
        theta = np.zeros(n_unk)
        theta[0], theta[1] = s, u
        rhs = np.array([resid(theta, st) for st in states])
        w, _, rank_c, _ = np.linalg.lstsq(design, rhs, rcond=None)
        if rank_c < 3:
            raise DeterminationError("stage (c) monomial design is rank-deficient")
        weights[p] = w
        fit_res = max(fit_res, float(np.max(np.abs(design @ w - rhs))))
    vand = np.array([[1.0, s, u, s * s, s * u, u * u] for s, u in probes])
    quads = np.linalg.solve(vand, weights)  # columns: per-monomial quadratics

    notes = []
    # x^2 xdd^2 weight = q5*u^2 forces alpha_01 = 0
    q_sq = quads[:, 2]
    if max(abs(q_sq[i]) for i in range(5)) > 1e-8 or abs(q_sq[5]) < 1e-6:
        raise DeterminationError("x^2 xdd^2 weight is not a pure u^2 multiple")
    notes.append(
        f"x^2*xdd^2 weight = {q_sq[5]:.6g}*u^2 -> alpha_01 = 0")
    # cross monomial x*xdd must then vanish identically at u=0
    q_cr = quads[:, 1]
    if max(abs(q_cr[0]), abs(q_cr[1]), abs(q_cr[3])) > 1e-8:
        raise DeterminationError("x*xdd weight does not vanish at u=0")
    # xd^2 weight at u=0: c0 + c1 s + c3 s^2 = s - 2 s^2
    q_xd = quads[:, 0]
    roots = np.roots([q_xd[3], q_xd[1], q_xd[0]])
    roots = sorted(_snap(float(np.real(r))) for r in roots)
    if len(roots) != 2 or any(abs(np.imag(r)) > 1e-10 for r in
                              np.roots([q_xd[3], q_xd[1], q_xd[0]])):
        raise DeterminationError("classical-level quadratic has no two real roots")
    selected = max(roots, key=abs)
    if selected == 0.0:
        raise DeterminationError("only the trivial root found at the classical level")
    notes.append(
        f"xd^2 weight roots {roots}; zero root drops the classical kinetic "
        "term, nonzero root kept")

    values = {lab: 0.0 for lab in labels}
    values[("alpha", 0)] = selected
    return LevelReport(
        level=0, labels=labels, values=values,
        rank=rank_a + rank_b + 2, n_unknowns=n_unk, fit_residual=fit_res,
        roots=roots, selected_root=selected, notes=notes)


def _determine_level_n(rng, n: int, k_max: int, samples: int,
                       base: KineticCoefficients, sampler,
                       hbar_probe: float = 1.0):
    """Affine elimination of the level-n unknowns given the lower levels.

    The level-n component of the master residual is exactly affine in the
    level-n lattice entries (their pairwise products land at level 2n), so
    a sampled linear solve determines them; full column rank certifies
    uniqueness.
    """
    mu = 1.0
    n_unk = 2 * (k_max + 1)
    labels = ([("alpha", k) for k in range(k_max + 1)]
              + [("beta", k) for k in range(k_max + 1)])
    states = sampler(rng, samples)

    r0 = _signed_level(base, states, mu, hbar_probe, n)
    mat = np.empty((len(states), n_unk))
    for l in range(n_unk):
        theta = np.zeros(n_unk)
        theta[l] = 1.0
        mat[:, l] = _signed_level(_theta_lattice(theta, n, k_max, base),
                                  states, mu, hbar_probe, n) - r0
    sol, _, rank, _ = np.linalg.lstsq(mat, -r0, rcond=None)
    if rank < n_unk:
        raise DeterminationError(
            f"level {n}: sample matrix rank {rank} < {n_unk} unknowns")
    fit = float(np.max(np.abs(mat @ sol + r0)))
    values = {lab: _snap(float(v)) for lab, v in zip(labels, sol)}
    # confirm on fresh states
    solved = _level_lattice(values, n, k_max, base)
    fresh = sampler(rng, max(8, n_unk))
    worst = 0.0
    for st in fresh:
        ratios, _, _ = level_residuals(solved, st, mu, hbar_probe, order=n)
        worst = max(worst, float(np.max(ratios[:n + 1])))
    if worst > 1e-8:
        raise DeterminationError(
            f"level {n}: solved lattice leaves scaled residual {worst:.2e}")
    return LevelReport(
        level=n, labels=labels, values=values, rank=rank,
        n_unknowns=n_unk, fit_residual=fit,
        notes=[f"confirmation residual on fresh states {worst:.2e}"])


def _signed_level(c, states, mu, hbar, n):
    """Raw (signed) level-n coefficient of the master residual per state."""
    out = np.empty(len(states))
    hbj = Jet((0.0, float(hbar)) + (0.0,) * max(0, n - 1))
    for i, st in enumerate(states):
        s1, s2, s3 = ds0dx_state(c, st, mu, hbj)
        t_val = kinetic_term(c, st[0], st[1], st[2], st[3], mu, hbj)
        expr = (st[1] * s1 ** 3 - s1 ** 4 / (2.0 * mu)
                + (hbj * hbj) * (0.375 * s2 * s2 - 0.25 * s1 * s3) / mu
                - s1 * s1 * t_val)
        out[i] = _taylor_of(expr, n)
    return out


def determine_coefficients(levels: int = 2, sampler=None, *, k_max: int = 4,
                           seed: int = 20260823, oversample: int = 3):
    """Level-by-level recovery of the kinetic coefficients.

    Runs the classical-level elimination and then the affine solves for
    levels 1..levels (each using the already-determined lower levels).
    Levels above 4 are outside the certified truncation.  ``sampler``, if
    given, must map (rng, count) to an array of states and replaces the
    default bounded sampler.  Returns (coefficients, report).
    """
    if not 0 <= levels <= 4:
        raise ValueError("levels must lie in 0..4 (certified truncation)")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    rng = np.random.default_rng(seed)
    draw = sample_states if sampler is None else sampler
    samples = oversample * 2 * (k_max + 1)
    reports = [_determine_level0(rng, k_max, samples, draw)]
    lattice = _level_lattice(reports[0].values, 0, k_max,
                             KineticCoefficients({}))
    for n in range(1, levels + 1):
        rep = _determine_level_n(rng, n, k_max, samples, lattice, draw)
        reports.append(rep)
        lattice = _level_lattice(rep.values, n, k_max, lattice)
    unique = all(r.rank >= r.n_unknowns for r in reports)
    return lattice, DeterminationReport(reports, lattice, unique)
