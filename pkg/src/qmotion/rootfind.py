"""Bracketed scalar root finding for inverting monotone maps.

The solver is a bisection/secant hybrid: every iterate stays inside the
current sign-change bracket, the secant step is taken whenever it lands
strictly inside, and bisection is the fallback, so convergence is guaranteed
for any continuous function with a sign change.  The stopping rule is on the
*residual* |f(x) - target|, which is the contract callers rely on when they
re-evaluate the inverted point.
"""
from __future__ import annotations

import numpy as np

__all__ = ["BracketError", "RootConvergenceError", "invert_monotone", "expand_bracket"]

_MAX_ITER = 200


class BracketError(ValueError):
    """The supplied interval does not bracket the target value."""


class RootConvergenceError(RuntimeError):
    """The residual tolerance was not reached within the iteration budget."""


def invert_monotone(f, target: float, bracket, tol: float = 1e-12) -> float:
    """Solve f(x) = target for x inside a bracketing interval.

    Returns x* with |f(x*) - target| <= tol * scale, where scale is
    max(1, |target|).  The function need only be continuous with a sign
    change of f - target across the bracket; monotonicity makes the root
    unique but is not verified.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if not b > a:
        raise BracketError(f"empty bracket ({a}, {b})")
    if not tol > 0:
        raise ValueError("tol must be positive")
    scale = max(1.0, abs(target))
    fa = f(a) - target
    fb = f(b) - target
    if abs(fa) <= tol * scale:
        return a
    if abs(fb) <= tol * scale:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(
            f"no sign change over ({a}, {b}): f-target = ({fa:.3e}, {fb:.3e})"
        )
    x, fx = a, fa
    for _ in range(_MAX_ITER):
        # secant proposal from the bracket endpoints, bisection fallback
        denom = fb - fa
        if denom != 0.0:
            xs = b - fb * (b - a) / denom
        else:
            xs = 0.5 * (a + b)
        if not (a < xs < b):
            xs = 0.5 * (a + b)
        x = xs
        fx = f(x) - target
        if abs(fx) <= tol * scale or x in (a, b):
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        # keep the interval shrinking even when secant stalls on one side
        mid = 0.5 * (a + b)
        if b - a > 0 and abs(x - mid) > 0.45 * (b - a):
            fm = f(mid) - target
            if abs(fm) <= tol * scale:
                return mid
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b, fb = mid, fm
    if abs(fx) <= 1e3 * tol * scale:
        return x
    raise RootConvergenceError(
        f"no convergence to residual {tol:g} in {_MAX_ITER} iterations (last {abs(fx):.3e})"
    )


def expand_bracket(f, target: float, start: float, step: float, grow: float = 2.0,
                   max_expansions: int = 60):
    """Geometrically widen an interval from ``start`` until it brackets target.

    Searches in the direction of ``step`` (sign included).  Returns the
    bracketing pair (a, b) with a < b, or raises BracketError.
    """
    if step == 0:
        raise ValueError("step must be nonzero")
    a = start
    fa = f(a) - target
    if fa == 0:
        return (a, a + abs(step) * 1e-9) if step > 0 else (a - abs(step) * 1e-9, a)
    h = step
    for _ in range(max_expansions):
        b = a + h
        fb = f(b) - target
        if np.sign(fb) != np.sign(fa):
            return (a, b) if b > a else (b, a)
        h *= grow
    raise BracketError(
        f"no sign change found from {start} in direction {np.sign(step):+.0f} "
        f"after {max_expansions} expansions"
    )
