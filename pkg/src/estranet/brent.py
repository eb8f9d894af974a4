"""Bounded scalar minimization by Brent's method (golden section + parabolic steps)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

_SQRT_EPS = math.sqrt(2.2e-16)
_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


@dataclass
class BrentResult:
    x: float
    fun: float
    nfev: int
    nit: int
    converged: bool


def _sign(v: float) -> float:
    return 1.0 if v >= 0 else -1.0


def brent_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-5,
    maxiter: int = 500,
    on_narrow: Callable[[float, float], None] | None = None,
) -> BrentResult:
    """Minimize ``f`` on ``[lo, hi]`` without derivatives.

    Same iteration as the classic ``fminbound``: the stopping tolerance is
    ``sqrt(eps)*|x| + xtol/3``. ``on_narrow(a, b)`` fires after every
    iteration that shrinks the bracket. ``f`` is never evaluated at the endpoints.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if xtol <= 0:
        raise ValueError("xtol must be positive")
    a, b = float(lo), float(hi)
    fulc = a + _GOLDEN * (b - a)
    nfc = xf = fulc
    rat = e = 0.0
    fx = f(xf)
    nfev, nit = 1, 0
    ffulc = fnfc = fx
    xm = 0.5 * (a + b)
    tol1 = _SQRT_EPS * abs(xf) + xtol / 3.0
    tol2 = 2.0 * tol1

    while abs(xf - xm) > (tol2 - 0.5 * (b - a)):
        if nit >= maxiter:
            return BrentResult(xf, fx, nfev, nit, False)
        golden = True
        if abs(e) > tol1:
            golden = False
            r = (xf - nfc) * (fx - ffulc)
            q = (xf - fulc) * (fx - fnfc)
            p = (xf - fulc) * q - (xf - nfc) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            r = e
            e = rat
            if abs(p) < abs(0.5 * q * r) and q * (a - xf) < p < q * (b - xf):
                rat = p / q
                x = xf + rat
                if (x - a) < tol2 or (b - x) < tol2:
                    rat = tol1 * _sign(xm - xf)
            else:
                golden = True
        if golden:
            e = (a - xf) if xf >= xm else (b - xf)
            rat = _GOLDEN * e

        x = xf + _sign(rat) * max(abs(rat), tol1)
        fu = f(x)
        nfev += 1
        nit += 1
        width = b - a

        if fu <= fx:
            if x >= xf:
                a = xf
            else:
                b = xf
            fulc, ffulc = nfc, fnfc
            nfc, fnfc = xf, fx
            xf, fx = x, fu
        else:
            if x < xf:
                a = x
            else:
                b = x
            if fu <= fnfc or nfc == xf:
                fulc, ffulc = nfc, fnfc
                nfc, fnfc = x, fu
            elif fu <= ffulc or fulc == xf or fulc == nfc:
                fulc, ffulc = x, fu

        if on_narrow is not None and (b - a) < width:
            on_narrow(a, b)
        xm = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(xf) + xtol / 3.0
        tol2 = 2.0 * tol1

    return BrentResult(xf, fx, nfev, nit, True)
