"""Scalar search routines used by the best-response solvers."""
from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_max(f, a: float, b: float, tol: float) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]`` until the bracket is narrower than ``tol``.

    Returns ``(x, f(x))`` for the better of the two final interior probes.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(n):
        h *= INV_PHI
        if fc > fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * h
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def newton_bisect(f, fprime, a: float, b: float, xtol: float = 1e-10,
                  ftol: float = 1e-9, maxiter: int = 200) -> float:
    """Root of ``f`` in ``[a, b]`` by Newton steps kept inside a shrinking bracket.

    ``f(a)`` and ``f(b)`` must have opposite signs. A Newton step that leaves
    the bracket, or a non-negative/zero derivative where a decreasing ``f`` is
    expected, falls back to bisection.
    """
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise ValueError("root is not bracketed")
    # orient so that f(lo) > 0 > f(hi)
    lo, hi = (a, b) if fa > 0 else (b, a)
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if abs(fx) < ftol:
            return x
        if fx > 0:
            lo = x
        else:
            hi = x
        d = fprime(x)
        step_ok = d != 0 and math.isfinite(d)
        x_new = x - fx / d if step_ok else None
        if x_new is None or not (min(lo, hi) < x_new < max(lo, hi)):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < xtol:
            return x_new
        x = x_new
    return x
