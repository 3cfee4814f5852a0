"""Quantum trajectories x(t) under the three candidate laws of motion.

The primary law is first order: mu dx/dt = dS0/dx, with the action gradient
supplied by a solution pair of the stationary wave equation.  Because the
gradient never vanishes, x(t) is strictly monotone and high-order time jets
of the motion follow from the spatial jets of dS0/dx by the chain rule --
that is how consistent initial data for the fourth-order form of the law is
produced, and how the closed-form observables (H, P, Q, L) are sampled
along a run.

The legacy first-order law xd = 2(E - V)/S0' is kept for comparison; it
freezes at classical turning points, which integrate_legacy_law detects and
reports instead of treating as an integration failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .jets import Jet, JetOrderError, flow_jet
from .kinetic_series import SingularityError
from .ode import DenseSolution, IntegrationFailure, IntegratorSettings, integrate_ivp
from .reduced_action import QuantumStateParams, s0p_jet
from .rootfind import BracketError, expand_bracket, invert_monotone
from .schrodinger import PhysParams, PotentialModel, SolutionPair, solve_pair

__all__ = [
    "LegacyReport",
    "ObservableSet",
    "ScenarioConfig",
    "TrajectoryResult",
    "TrajectorySample",
    "VelocityFloorError",
    "classical_limit_factor",
    "free_time_of_x",
    "free_x_of_time",
    "integrate_legacy_law",
    "integrate_newton_law",
    "integrate_velocity_law",
    "observables",
    "state_jet_from_x",
    "summarize",
    "write_csv",
    "write_summary",
]

_LAWS = ("velocity", "newton", "legacy")
_VELOCITY_FLOOR = 1e-12

CSV_HEADER = "t,x,xdot,xddot,xdddot,H,P,Q,s0p"


class VelocityFloorError(RuntimeError):
    """|xd| fell below the floor that the theory forbids reaching."""

    def __init__(self, t: float, state):
        super().__init__(
            f"|xd| below {_VELOCITY_FLOOR:g} at t = {t:.6g} (state {state}); "
            "the law of motion excludes xd = 0, so this is a numerical abort")
        self.t = t
        self.state = tuple(state)


class TrajectorySample(NamedTuple):
    t: float
    x: float
    xdot: float
    xddot: float
    xdddot: float
    H: float
    P: float
    Q: float
    s0p: float


class ObservableSet(NamedTuple):
    H: float
    P: float
    Q: float
    L: float


@dataclass
class ScenarioConfig:
    """One trajectory run: which law, over which span, from which state.

    ``domain`` bounds the wave-pair construction for numerically solved
    potentials; the free pair is closed-form and ignores it.  ``pair`` may
    be supplied prebuilt (it is cached after the first build either way).
    """

    potential: PotentialModel
    params: PhysParams
    q: QuantumStateParams
    x_start: float = 0.0
    t_span: tuple = (0.0, 10.0)
    law: str = "velocity"
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    samples: int = 512
    domain: tuple | None = None
    grid_step: float = 1e-3
    pair: SolutionPair | None = None
    out_path: str | None = None

    def __post_init__(self):
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError(f"empty time span {self.t_span}")
        if self.law not in _LAWS:
            raise ValueError(f"law must be one of {_LAWS}, got {self.law!r}")
        if self.samples < 2:
            raise ValueError("need at least two output samples")

    def build_pair(self) -> SolutionPair:
        if self.pair is None:
            dom = self.domain
            if dom is None:
                dom = (self.x_start - 10.0, self.x_start + 10.0)
            self.pair = solve_pair(self.potential, self.params, dom,
                                   grid_step=self.grid_step)
        lo, hi = self.pair.domain
        if self.pair.source != "analytic" and not lo <= self.x_start <= hi:
            raise ValueError(
                f"x_start = {self.x_start} outside pair domain [{lo}, {hi}]")
        return self.pair


@dataclass
class LegacyReport:
    """Stall diagnostics for the legacy first-order law."""

    stalled: bool
    threshold: float
    t_stall: float | None = None
    x_stall: float | None = None
    x_turn: float | None = None
    velocity_gap: float = 0.0
    notes: list = field(default_factory=list)


@dataclass
class TrajectoryResult:
    config: ScenarioConfig
    law: str
    samples: list
    dense: DenseSolution
    notes: list = field(default_factory=list)

    def arrival_time(self, x_target: float) -> float:
        """First time at which x(t) reaches x_target (x is monotone under
        the first-order laws, so the crossing is unique)."""
        f = lambda t: float(self.dense(t)[0])
        lo, hi = self.dense.t0, self.dense.t1
        return invert_monotone(f, x_target, (lo, hi), tol=1e-14)

    def columns(self) -> np.ndarray:
        return np.array([tuple(s) for s in self.samples])


# ---------------------------------------------------------------------------
# observables and chain-rule jets

def observables(j: Jet, params: PhysParams, potential=None,
                x: float | None = None) -> ObservableSet:
    """Closed-form (H, P, Q, L) at a motion jet of order >= 3.

    Q is the quantum potential -(hbar^2/4 mu)[(5/2) xdd^2/xd^4 - xddd/xd^3];
    H and L split as mu xd^2/2 +- (Q + V), so H + L = mu xd^2 identically
    (checked and enforced here).
    """
    if j.order < 3:
        raise JetOrderError("observables need x..xdddot")
    xd, xdd, xddd = j.coeffs[1], j.coeffs[2], j.coeffs[3]
    if xd == 0.0:
        raise SingularityError("observables undefined at xd = 0")
    mu = params.mu
    quart = params.hbar ** 2 / (4.0 * mu)
    bracket = 2.5 * xdd * xdd / xd ** 4 - xddd / xd ** 3
    Q = -quart * bracket
    if potential is None:
        V = 0.0
    else:
        V = float(potential.value(j.coeffs[0] if x is None else x))
    half = 0.5 * mu * xd * xd
    H = half + Q + V
    L = half - Q - V
    P = mu * xd - quart * (2.0 * xdd * xdd / xd ** 5 - xddd / xd ** 4)
    if not (math.isfinite(H) and math.isfinite(L) and math.isfinite(P)):
        raise SingularityError("observables overflow near xd = 0")
    if abs((H + L) - mu * xd * xd) > 1e-12 * (1.0 + abs(half) + abs(Q) + abs(V)):
        raise RuntimeError("H + L = mu xd^2 decomposition violated")
    return ObservableSet(H, P, Q, L)


def state_jet_from_x(pair: SolutionPair, q: QuantumStateParams,
                     params: PhysParams, x: float, order: int = 6) -> Jet:
    """Time jet (x, xd, xdd, ...) of the first-order law at position x.

    With g(x) = dS0/dx / mu, the jet is the Taylor flow of xd = g(x), so
    every coefficient is exact given the spatial derivatives of the action
    gradient (which the wave equation supplies in closed recursion).
    """
    if not 1 <= order <= 6:
        raise ValueError("state jets support orders 1..6")
    sp = s0p_jet(pair, q, x, order - 1)
    g = [c / params.mu for c in sp.coeffs]
    return flow_jet(g, x, order)


def _sample(t: float, j: Jet, params: PhysParams, potential, s0p: float
            ) -> TrajectorySample:
    obs = observables(j, params, potential)
    return TrajectorySample(t, j.coeffs[0], j.coeffs[1], j.coeffs[2],
                            j.coeffs[3], obs.H, obs.P, obs.Q, s0p)


# ---------------------------------------------------------------------------
# the three laws

def integrate_velocity_law(s: ScenarioConfig) -> TrajectoryResult:
    """Integrate mu xd = dS0/dx with dense output and observable sampling."""
    pair = s.build_pair()
    mu = s.params.mu

    def rhs(t, y):
        return [s0p_jet(pair, s.q, float(y[0]), 0).value / mu]

    dense = integrate_ivp(rhs, [s.x_start], s.t_span, s.integrator)
    ts = np.linspace(s.t_span[0], s.t_span[1], s.samples)
    out = []
    for t in ts:
        x = float(dense(t)[0])
        j = state_jet_from_x(pair, s.q, s.params, x, order=3)
        # the law itself is Bohm's relation, so s0p = mu*xd by construction
        out.append(_sample(float(t), j, s.params, s.potential,
                           mu * j.coeffs[1]))
    result = TrajectoryResult(s, "velocity", out, dense)
    xs = np.array([p.x for p in out])
    dx = np.diff(xs)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        result.notes.append("sampled x is not strictly monotone")
    return result


def integrate_newton_law(s: ScenarioConfig, init=None) -> TrajectoryResult:
    """Integrate the fourth-order law of motion as a first-order system.

    x4 = -(4 mu xd^4/hbar^2)(mu xdd + V') - 10 xdd^3/xd^2 + 8 xdd xddd/xd.

    The default initial (x, xd, xdd, xddd) is the consistent jet of the
    first-order law at x_start; an explicit 4-tuple overrides it (the
    fourth-order equation admits such data, but the sampled H then differs
    from params.energy).  |xd| reaching the 1e-12 floor aborts: the law
    cannot cross xd = 0 on consistent data.
    """
    pair = s.build_pair()
    mu, hbar = s.params.mu, s.params.hbar
    coef = 4.0 * mu / hbar ** 2
    grad = s.potential.grad

    if init is None:
        y0 = list(state_jet_from_x(pair, s.q, s.params, s.x_start, 3).coeffs)
    else:
        y0 = [float(v) for v in init]
        if len(y0) != 4:
            raise ValueError("init must supply (x, xd, xdd, xddd)")

    def rhs(t, y):
        x, xd, xdd, xddd = y
        if abs(xd) < _VELOCITY_FLOOR:
            raise VelocityFloorError(t, y)
        x4 = (-coef * xd ** 4 * (mu * xdd + grad(x))
              - 10.0 * xdd ** 3 / xd ** 2 + 8.0 * xdd * xddd / xd)
        return [xd, xdd, xddd, x4]

    dense = integrate_ivp(rhs, y0, s.t_span, s.integrator)
    ts = np.linspace(s.t_span[0], s.t_span[1], s.samples)
    out = []
    for t in ts:
        y = dense(t)
        j = Jet(tuple(float(v) for v in y))
        s0p = s0p_jet(pair, s.q, float(y[0]), 0).value  # independent of y[1]
        out.append(_sample(float(t), j, s.params, s.potential, s0p))
    return TrajectoryResult(s, "newton", out, dense)


def _turning_point(potential: PotentialModel, energy: float, x0: float,
                   direction: float):
    """Nearest solution of V(x) = energy beyond x0 in the motion direction."""
    try:
        bracket = expand_bracket(potential.value, energy, x0,
                                 0.25 * direction)
        return invert_monotone(potential.value, energy, bracket, tol=1e-12)
    except (BracketError, ValueError, RuntimeError):
        return None


def integrate_legacy_law(s: ScenarioConfig):
    """Integrate xd = 2(E - V)/S0' and watch for turning-point stalls.

    Returns (TrajectoryResult, LegacyReport).  A stall is flagged when
    |xd| stays below 1e-6 of its initial size for three successive output
    samples while x keeps creeping monotonically toward the classical
    turning point; an integration abort near the turning point is folded
    into the same report rather than raised.
    """
    pair = s.build_pair()
    mu = s.params.mu
    E = s.params.energy
    vfun = s.potential.value

    def xdot(x):
        return 2.0 * (E - vfun(x)) / s0p_jet(pair, s.q, x, 0).value

    def rhs(t, y):
        return [xdot(float(y[0]))]

    notes = []
    try:
        dense = integrate_ivp(rhs, [s.x_start], s.t_span, s.integrator)
        t_end = s.t_span[1]
    except IntegrationFailure as fail:
        dense = fail.partial
        t_end = fail.t_last
        notes.append(f"integration stopped early at t = {t_end:.6g}: "
                     f"{fail.reason}")
        if dense is None:
            raise
    ts = np.linspace(s.t_span[0], t_end, s.samples)
    out = []
    gap = 0.0
    for t in ts:
        x = float(dense(t)[0])
        sp = s0p_jet(pair, s.q, x, 2)
        vj = Jet(tuple(s.potential.derivs(x, 2)))
        wj = 2.0 * (E - vj) / sp          # (w, w', w'') as a spatial jet
        j = flow_jet(wj.coeffs, x, 3)     # (x, xd, xdd, xddd) under this law
        v = j.coeffs[1]
        try:
            out.append(_sample(float(t), j, s.params, s.potential,
                               sp.coeffs[0]))
        except (ZeroDivisionError, OverflowError):
            out.append(TrajectorySample(float(t), x, v, j.coeffs[2],
                                        j.coeffs[3], np.nan, np.nan, np.nan,
                                        sp.coeffs[0]))
        gap = max(gap, abs(v - sp.coeffs[0] / mu))
    result = TrajectoryResult(s, "legacy", out, dense, notes)

    v0 = abs(out[0].xdot) if out else 0.0
    threshold = 1e-6 * v0
    report = LegacyReport(stalled=False, threshold=threshold,
                          velocity_gap=gap)
    direction = np.sign(out[0].xdot) if out else 1.0
    x_turn = None
    if s.potential.kind != "free":
        x_turn = _turning_point(s.potential, E, s.x_start, float(direction))
    report.x_turn = x_turn
    run = 0
    for p in out:
        slow = abs(p.xdot) < threshold
        closing = x_turn is None or abs(p.x - x_turn) <= abs(s.x_start - x_turn)
        run = run + 1 if (slow and closing) else 0
        if run >= 3:
            report.stalled = True
            report.t_stall = p.t
            report.x_stall = p.x
            break
    if report.stalled:
        report.notes.append(
            f"xd below {threshold:.3e} from t = {report.t_stall:.6g} on; "
            f"x pinned near {report.x_stall:.9g}"
            + (f" (turning point {x_turn:.9g})" if x_turn is not None else ""))
    return result, report


# ---------------------------------------------------------------------------
# free-particle closed form

def free_time_of_x(params: PhysParams, q: QuantumStateParams, x: float) -> float:
    """Elapsed time t - t0 for the free-particle law, measured from x = 0.

    Closed form: a sqrt(2E/mu) (t - t0) =
    (a^2+b^2+1) x/2 + (1+b^2-a^2) sin(2kx)/(4k) - a b cos(2kx)/(2k),
    with the x = 0 value of the right-hand side subtracted.
    """
    E = params.energy
    if not E > 0:
        raise ValueError("the free closed form needs positive energy")
    k = np.sqrt(2.0 * params.mu * E) / params.hbar
    a, b = q.a, q.b

    def F(u):
        return ((a * a + b * b + 1.0) * u / 2.0
                + (1.0 + b * b - a * a) * np.sin(2.0 * k * u) / (4.0 * k)
                - a * b * np.cos(2.0 * k * u) / (2.0 * k))

    return float((F(x) - F(0.0)) / (a * np.sqrt(2.0 * E / params.mu)))


def free_x_of_time(params: PhysParams, q: QuantumStateParams, t: float) -> float:
    """Invert the free closed form: position reached after elapsed time t."""
    if t == 0.0:
        return 0.0
    f = lambda u: free_time_of_x(params, q, u)
    v_cl = classical_limit_factor(q) * np.sqrt(2.0 * params.energy / params.mu)
    step = np.sign(t) * np.sign(q.a) * max(0.5, abs(t * v_cl))
    bracket = expand_bracket(f, t, 0.0, float(step))
    return invert_monotone(f, t, bracket, tol=1e-14)


def classical_limit_factor(q: QuantumStateParams) -> float:
    """Proportionality factor between x and sqrt(2E/mu)(t - t0) in the
    classical limit: 2a/(a^2 + b^2 + 1); equals 1 only at (a, b) = (1, 0)."""
    return 2.0 * q.a / (q.a * q.a + q.b * q.b + 1.0)


# ---------------------------------------------------------------------------
# artifacts

def write_csv(samples, path) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for p in samples:
            fh.write(",".join("%.17g" % v for v in p) + "\n")


def summarize(result: TrajectoryResult) -> dict:
    """Drift maxima and invariant verdicts for one run."""
    params = result.config.params
    cols = result.columns()
    E = params.energy
    h_abs = float(np.nanmax(np.abs(cols[:, 5] - E)))
    xd = cols[:, 2]
    bohm = float(np.nanmax(np.abs(params.mu * xd - cols[:, 8])
                           / np.maximum(np.abs(params.mu * xd), 1e-30)))
    p_drift = float(np.nanmax(np.abs(cols[:, 6] - cols[0, 6]))
                    / max(abs(cols[0, 6]), 1e-30))
    min_xd = float(np.min(np.abs(xd)))
    return {
        "law": result.law,
        "samples": len(result.samples),
        "t_span": list(result.config.t_span),
        "x_first": cols[0, 1],
        "x_last": cols[-1, 1],
        "max_energy_drift_abs": h_abs,
        "max_energy_drift_rel": h_abs / max(abs(E), 1e-30),
        "max_bohm_gap_rel": bohm,
        "max_principal_drift_rel": p_drift,
        "min_abs_xdot": min_xd,
        "energy_conserved": bool(h_abs <= max(1e-8 * abs(E), 1e-10)),
        "no_node": bool(min_xd > 0.0),
        "notes": list(result.notes),
    }


def write_summary(result: TrajectoryResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(summarize(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
