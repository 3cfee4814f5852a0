"""Real solution pairs of the stationary Schrodinger equation.

For a particle of mass mu with energy E in a potential V, the module
produces two real, linearly independent solutions (phi1, phi2) of

    phi'' = (2*mu/hbar^2) * (V(x) - E) * phi

normalized at an anchor point by phi1 = 0, phi1' = 1, phi2 = 1, phi2' = 0,
so their Wronskian phi2*phi1' - phi1*phi2' equals 1 there (and everywhere).
The free potential gets the closed-form pair sin(kx), cos(kx) with
Wronskian k; every other catalog entry is integrated on a uniform grid with
the three-point fourth-order Numerov recursion.  Derivatives of order >= 2
are never differenced: they come from the differential equation itself,
which is also what keeps downstream phase-space constructions consistent.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .jets import Jet, Dual

__all__ = [
    "PhysParams",
    "PotentialModel",
    "SolutionPair",
    "SchrodingerError",
    "DomainError",
    "solve_pair",
    "eval_phi",
    "wronskian",
    "OVERFLOW_CAP",
]

OVERFLOW_CAP = 1e12
_MAX_PHI_ORDER = 6


class SchrodingerError(ValueError):
    """Invalid physical parameters or solver configuration."""


class DomainError(SchrodingerError):
    """Evaluation outside the solved domain, or an unsolvable domain."""


@dataclass(frozen=True)
class PhysParams:
    """Mass, Planck constant and total energy in consistent units."""

    hbar: float
    mu: float
    energy: float

    def __post_init__(self):
        if not (self.hbar > 0 and self.mu > 0):
            raise SchrodingerError("hbar and mu must be positive")
        if not math.isfinite(self.energy):
            raise SchrodingerError("energy must be finite")

    @property
    def kratio(self) -> float:
        """2*mu/hbar^2, the prefactor of (V - E) in the wave equation."""
        return 2.0 * self.mu / self.hbar**2


class PotentialModel:
    """One-dimensional potential from a small catalog.

    Analytic kinds (free, linear, harmonic) evaluate exactly, including on
    jets and dual numbers; tabulated potentials interpolate a strictly
    increasing (x, V) table with a cubic spline, whose derivative is used
    for dV/dx so value and gradient always come from the same interpolant.
    """

    def __init__(self, kind: str, *, slope: float = 0.0, stiffness: float = 0.0,
                 table: tuple[np.ndarray, np.ndarray] | None = None):
        if kind not in ("free", "linear", "harmonic", "tabulated"):
            raise SchrodingerError(f"unknown potential kind {kind!r}")
        self.kind = kind
        self.slope = float(slope)
        self.stiffness = float(stiffness)
        self._spline: CubicSpline | None = None
        self._table = None
        if kind == "harmonic" and not self.stiffness > 0:
            raise SchrodingerError("harmonic potential needs positive stiffness")
        if kind == "tabulated":
            if table is None:
                raise SchrodingerError("tabulated potential needs a table")
            xs, vs = (np.asarray(a, dtype=float) for a in table)
            if xs.ndim != 1 or xs.shape != vs.shape or len(xs) < 4:
                raise SchrodingerError("table needs matching 1-d arrays, >= 4 rows")
            if not np.all(np.diff(xs) > 0):
                raise SchrodingerError("table x values must be strictly increasing")
            self._table = (xs, vs)
            self._spline = CubicSpline(xs, vs)

    # -- constructors --------------------------------------------------

    @classmethod
    def free(cls) -> "PotentialModel":
        return cls("free")

    @classmethod
    def linear(cls, slope: float) -> "PotentialModel":
        return cls("linear", slope=slope)

    @classmethod
    def harmonic(cls, stiffness: float) -> "PotentialModel":
        return cls("harmonic", stiffness=stiffness)

    @classmethod
    def tabulated(cls, xs, vs) -> "PotentialModel":
        return cls("tabulated", table=(xs, vs))

    @classmethod
    def from_csv(cls, path) -> "PotentialModel":
        """Two-column CSV (x, V); a single non-numeric header row is allowed."""
        xs, vs = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise SchrodingerError(f"CSV row {row!r} needs two columns")
                try:
                    x, v = float(row[0]), float(row[1])
                except ValueError:
                    if not xs:  # header line
                        continue
                    raise SchrodingerError(f"non-numeric CSV row {row!r}")
                xs.append(x)
                vs.append(v)
        return cls.tabulated(np.asarray(xs), np.asarray(vs))

    # -- evaluation ----------------------------------------------------

    def value(self, x):
        if self.kind == "free":
            return 0.0 * x if isinstance(x, (Jet, Dual, np.ndarray)) else 0.0
        if self.kind == "linear":
            return self.slope * x
        if self.kind == "harmonic":
            return 0.5 * self.stiffness * x * x
        if isinstance(x, Jet):
            return self._spline_on_jet(x)
        if isinstance(x, Dual):
            raise SchrodingerError("tabulated potentials do not support dual numbers")
        self._check_table_range(x)
        return self._spline(x)

    def grad(self, x):
        if self.kind == "free":
            return 0.0 * x if isinstance(x, np.ndarray) else 0.0
        if self.kind == "linear":
            return self.slope + 0.0 * x if isinstance(x, np.ndarray) else self.slope
        if self.kind == "harmonic":
            return self.stiffness * x
        self._check_table_range(x)
        return self._spline(x, 1)

    def derivs(self, x: float, m: int) -> list[float]:
        """[V, V', ..., V^(m)] at x.  Tabulated entries beyond the spline's
        cubic degree are zero."""
        out = [0.0] * (m + 1)
        if self.kind == "linear":
            out[0] = self.slope * x
            if m >= 1:
                out[1] = self.slope
        elif self.kind == "harmonic":
            out[0] = 0.5 * self.stiffness * x * x
            if m >= 1:
                out[1] = self.stiffness * x
            if m >= 2:
                out[2] = self.stiffness
        elif self.kind == "tabulated":
            self._check_table_range(x)
            for j in range(min(m, 3) + 1):
                out[j] = float(self._spline(x, j))
        return out

    def _check_table_range(self, x) -> None:
        xs = self._table[0]
        if np.any(np.asarray(x) < xs[0]) or np.any(np.asarray(x) > xs[-1]):
            raise DomainError(
                f"x outside tabulated range [{xs[0]}, {xs[-1]}]"
            )

    def _spline_on_jet(self, x: Jet):
        x0 = float(x.value)
        self._check_table_range(x0)
        i = int(np.clip(np.searchsorted(self._spline.x, x0, side="right") - 1,
                        0, len(self._spline.x) - 2))
        c = self._spline.c[:, i]
        w = x - self._spline.x[i]
        return ((c[0] * w + c[1]) * w + c[2]) * w + c[3]


@dataclass
class SolutionPair:
    """Two independent real wave solutions sharing one energy.

    ``domain`` is the interval actually covered (it may be narrower than
    requested when the solution magnitude hit the overflow cap, in which
    case ``truncated`` is set).  ``wronskian_ref`` is the pair's constant
    Wronskian: k for the analytic free pair, 1 for Numerov pairs.
    """

    potential: PotentialModel
    params: PhysParams
    anchor: float
    domain: tuple[float, float]
    wronskian_ref: float
    source: str  # "analytic" | "numerov"
    truncated: bool = False
    _grid: dict = field(default_factory=dict, repr=False)

    # wave number, defined for the free analytic pair
    @property
    def k(self) -> float:
        if self.source != "analytic":
            raise SchrodingerError("wave number is defined for the free pair only")
        return self._grid["k"]

    def eval01(self, x: float):
        """(phi1, phi1', phi2, phi2') at x."""
        if self.source == "analytic":
            k = self._grid["k"]
            s, c = math.sin(k * x), math.cos(k * x)
            return s, k * c, c, -k * s
        if not (self.domain[0] - 1e-9 <= x <= self.domain[1] + 1e-9):
            raise DomainError(
                f"x = {x} outside solved domain [{self.domain[0]}, {self.domain[1]}]"
            )
        g = self._grid
        return (
            _interp_local(g["xs"], g["y1"], x),
            _interp_local(g["xs"], g["d1"], x),
            _interp_local(g["xs"], g["y2"], x),
            _interp_local(g["xs"], g["d2"], x),
        )

    def phi_jets(self, x: float, order: int) -> tuple[Jet, Jet]:
        """Spatial jets of (phi1, phi2) at x, derivatives from the wave
        equation beyond first order."""
        d1, d2 = eval_phi(self, x, order)
        return Jet(tuple(d1)), Jet(tuple(d2))


def _interp_local(xs: np.ndarray, ys: np.ndarray, x: float, width: int = 6) -> float:
    """Polynomial interpolation through the ``width`` grid points nearest x."""
    n = len(xs)
    if n < width:
        width = n
    i = int(np.searchsorted(xs, x)) - width // 2
    i = max(0, min(i, n - width))
    xw = xs[i : i + width] - x  # center to kill cancellation
    yw = ys[i : i + width]
    out = 0.0
    for j in range(width):
        lj = 1.0
        for m in range(width):
            if m != j:
                lj *= xw[m] / (xw[m] - xw[j])
        out += lj * yw[j]
    return out


def solve_pair(potential: PotentialModel, params: PhysParams,
               domain: tuple[float, float], anchor: float | None = None,
               grid_step: float = 1e-3) -> SolutionPair:
    """Build the normalized solution pair over ``domain``.

    The free potential returns the closed-form pair; everything else is
    propagated with Numerov steps of size ``grid_step`` in both directions
    from the anchor, seeded by a fourth-order Taylor step.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise DomainError(f"empty domain ({lo}, {hi})")
    if anchor is None:
        anchor = 0.5 * (lo + hi)
    anchor = float(anchor)
    if not (lo <= anchor <= hi):
        raise DomainError(f"anchor {anchor} outside domain ({lo}, {hi})")

    if potential.kind == "free":
        if not params.energy > 0:
            raise SchrodingerError("free-particle pair needs positive energy")
        k = math.sqrt(2.0 * params.mu * params.energy) / params.hbar
        pair = SolutionPair(potential, params, anchor, (lo, hi), k, "analytic")
        pair._grid["k"] = k
        return pair

    if not grid_step > 0:
        raise SchrodingerError("grid_step must be positive")

    c = params.kratio

    def f(x: float) -> float:
        return c * (potential.value(x) - params.energy)

    h = grid_step
    n_left = int(math.ceil((anchor - lo) / h - 1e-9))
    n_right = int(math.ceil((hi - anchor) / h - 1e-9))
    if n_left + n_right < 8:
        raise DomainError("domain too narrow for the requested grid step")

    def seed(y0: float, d0: float, direction: float) -> float:
        # Taylor step using wave-equation derivatives at the anchor
        vd = potential.derivs(anchor, 2)
        f0 = c * (vd[0] - params.energy)
        f1 = c * vd[1]
        f2 = c * vd[2]
        y2 = f0 * y0
        y3 = f1 * y0 + f0 * d0
        y4 = f2 * y0 + 2.0 * f1 * d0 + f0 * y2
        s = direction * h
        return y0 + s * d0 + s**2 / 2 * y2 + s**3 / 6 * y3 + s**4 / 24 * y4

    def march(n_steps: int, direction: float, y0: float, d0: float) -> np.ndarray:
        """Numerov propagation; returns values at offsets 0..n_done."""
        ys = np.empty(n_steps + 1)
        ys[0] = y0
        if n_steps == 0:
            return ys
        ys[1] = seed(y0, d0, direction)
        h2 = h * h
        fm = f(anchor)
        fi = f(anchor + direction * h)
        for i in range(1, n_steps):
            fp = f(anchor + direction * (i + 1) * h)
            num = 2.0 * ys[i] * (1.0 + 5.0 * h2 * fi / 12.0) - ys[i - 1] * (
                1.0 - h2 * fm / 12.0
            )
            ys[i + 1] = num / (1.0 - h2 * fp / 12.0)
            if abs(ys[i + 1]) > OVERFLOW_CAP:
                return ys[: i + 2]
            fm, fi = fi, fp
        return ys

    r1 = march(n_right, +1.0, 0.0, 1.0)
    l1 = march(n_left, -1.0, 0.0, 1.0)
    r2 = march(n_right, +1.0, 1.0, 0.0)
    l2 = march(n_left, -1.0, 1.0, 0.0)

    nr = min(len(r1), len(r2)) - 1
    nl = min(len(l1), len(l2)) - 1
    truncated = nr < n_right or nl < n_left

    xs = anchor + h * np.arange(-nl, nr + 1)
    y1 = np.concatenate([l1[nl:0:-1], r1[: nr + 1]])
    y2 = np.concatenate([l2[nl:0:-1], r2[: nr + 1]])

    d1 = _stencil_derivative(y1, h)
    d2 = _stencil_derivative(y2, h)
    d1[nl] = 1.0  # anchor derivatives are initial data, keep them exact
    d2[nl] = 0.0

    pair = SolutionPair(
        potential,
        params,
        anchor,
        (float(xs[0]), float(xs[-1])),
        1.0,
        "numerov",
        truncated=truncated,
    )
    pair._grid.update(xs=xs, y1=y1, y2=y2, d1=d1, d2=d2)
    return pair


def _stencil_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative of uniformly gridded values."""
    n = len(y)
    d = np.empty(n)
    if n < 5:
        raise DomainError("grid too short for fourth-order differencing")
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    return d


def eval_phi(pair: SolutionPair, x: float, max_order: int = 1):
    """Derivative stacks (phi1^(0..m), phi2^(0..m)) at x.

    Orders 0 and 1 come from the pair's representation; order >= 2 applies
    phi'' = (2 mu/hbar^2)(V - E) phi and its Leibniz descendants, so no
    numerical differencing beyond first order ever happens.
    """
    if not 0 <= max_order <= _MAX_PHI_ORDER:
        raise SchrodingerError(f"max_order must be in [0, {_MAX_PHI_ORDER}]")
    p1, d1, p2, d2 = pair.eval01(x)
    out1 = [p1, d1]
    out2 = [p2, d2]
    if max_order >= 2:
        c = pair.params.kratio
        vd = pair.potential.derivs(x, max(0, max_order - 2))
        fd = [c * (vd[0] - pair.params.energy)] + [c * v for v in vd[1:]]
        for m in range(2, max_order + 1):
            acc1 = 0.0
            acc2 = 0.0
            for j in range(m - 1):
                w = math.comb(m - 2, j) * fd[j]
                acc1 += w * out1[m - 2 - j]
                acc2 += w * out2[m - 2 - j]
            out1.append(acc1)
            out2.append(acc2)
    return np.asarray(out1[: max_order + 1]), np.asarray(out2[: max_order + 1])


def wronskian(pair: SolutionPair, x: float) -> float:
    """phi2 * phi1' - phi1 * phi2' at x (constant along the axis)."""
    p1, d1, p2, d2 = pair.eval01(x)
    return p2 * d1 - p1 * d2
