"""Bracketed scalar root finding used by the mesh generators."""

from __future__ import annotations

from typing import Callable

from scipy import optimize

from .errors import RootNotBracketed

RTOL = 1e-12
MAXITER = 200


def find_root(f: Callable[[float], float], a: float, b: float,
              rtol: float = RTOL, xtol: float = 1e-300) -> float:
    """Root of `f` on ``[a, b]`` by Brent's bisection/secant hybrid.

    Raises RootNotBracketed when ``f(a)`` and ``f(b)`` have the same sign.
    An exact zero at either end is returned as is.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise RootNotBracketed(
            f"no sign change on [{a!r}, {b!r}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    # brentq rejects rtol below 4*machine epsilon
    rtol = max(rtol, 4.0 * 2.220446049250313e-16)
    return optimize.brentq(f, a, b, xtol=xtol, rtol=rtol, maxiter=MAXITER)
