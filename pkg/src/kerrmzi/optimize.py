"""Golden-section search utilities for locating fringe extrema and operating points."""

from __future__ import annotations

import math
from typing import Callable, Sequence

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 400,
) -> tuple[float, float]:
    """Minimize a unimodal function on [lo, hi].

    Returns (x, f(x)) with x located to within tol.  The bracket is not
    required to be tight; on a flat function the midpoint is returned.
    """
    if hi < lo:
        lo, hi = hi, lo
    a, b = lo, hi
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if h <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def refine_grid_minimum(
    f: Callable[[float], float],
    xs: Sequence[float],
    vals: Sequence[float],
    tol: float = 1e-10,
) -> tuple[float, float]:
    """Golden-refine the minimum of f around the best point of a sampled grid.

    xs must be sorted ascending; vals are f evaluated on xs.  The bracket is
    the pair of grid neighbours of the argmin (clamped at the domain edges).
    """
    if len(xs) != len(vals) or len(xs) < 2:
        raise ValueError("grid and values must have equal length >= 2")
    i = min(range(len(vals)), key=lambda k: vals[k])
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    x, fx = golden_section_minimize(f, lo, hi, tol=tol)
    # keep the grid point if refinement did not improve on it
    if vals[i] < fx:
        return xs[i], vals[i]
    return x, fx
