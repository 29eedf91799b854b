"""Gamma-family special functions used by the stencil quadrature.

The coefficient formulas need the upper incomplete gamma function at
negative, non-integer parameters, which scipy does not expose.  This module
extends it there and also provides the normalization constant of the
tempered operator.
"""

import math

from scipy import special as sp

__all__ = ["upper_incomplete_gamma", "normalization_constant"]

# e^{-x} underflows to subnormals shortly after this point; results would be
# silently meaningless, so we refuse instead.
_X_MAX = 705.0

# Below this the continued fraction stalls; above it the series loses its
# convergence margin.  Either branch is good to ~1e-14 on its own side.
_CF_SWITCH = 0.35

_EULER = 0.5772156649015328606
_ZETA2 = 1.6449340668482264365
_ZETA3 = 1.2020569031595942854


def _cf_upper(a: float, x: float) -> float:
    """Legendre continued fraction for gamma(a, x), valid for x > 0.

    Modified Lentz evaluation.  Well conditioned for any a <= x + 1; we only
    call it with a <= 0 and x >= _CF_SWITCH.
    """
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 400):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return math.exp(-x + a * math.log(x)) * h
    raise RuntimeError(f"continued fraction failed to converge (a={a}, x={x})")


def _series_upper(a: float, x: float) -> float:
    """gamma(a, x) for a <= ~0, small x, via the lower-incomplete series.

    The series term k = m0 (m0 = -round(a)) and the Gamma(a) pole nearly
    cancel near non-positive integer a; they are combined analytically
    through expm1, so the result stays accurate arbitrarily close to (and
    at) the integers.
    """
    m0 = int(round(-a))
    delta = a + m0
    lnx = math.log(x)
    sign = -1.0 if m0 % 2 else 1.0
    fact = float(math.factorial(m0))
    # Gamma(a) - (-1)^m0 x^delta / (m0! delta), the singular pair
    if abs(delta) < 1e-250:  # below this the pair is its analytic limit
        sing = sign / fact * (sp.digamma(m0 + 1) - lnx)
    else:
        if abs(delta) < 1e-4:
            # log-gamma Taylor series; lgamma(1 + delta) itself cannot
            # resolve delta below machine epsilon
            lg = delta * (-_EULER + delta * (_ZETA2 / 2.0 - delta * _ZETA3 / 3.0))
        else:
            lg = math.lgamma(1.0 + delta)
        u = lg - math.fsum(math.log1p(-delta / i) for i in range(1, m0 + 1))
        v = delta * lnx
        sing = sign / fact * math.exp(v) * math.expm1(u - v) / delta
    # remaining series of the lower incomplete gamma, all terms regular
    term = x**a  # (-1)^k x^(a+k) / k!
    total = 0.0
    for k in range(200):
        if k != m0:
            total += term / (a + k)
        term *= -x / (k + 1)
        if abs(term) <= 1e-18 * (abs(total) + abs(sing)):
            break
    return sing - total


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma function integral_x^inf t^(a-1) e^(-t) dt.

    Supports negative non-integer parameters (and negative integers for
    x > 0), which the scheme's coefficient formulas require.

    Parameters
    ----------
    a : float
        Parameter; any real for x > 0, must be positive when x = 0.
    x : float
        Lower integration limit, >= 0.

    Raises
    ------
    ValueError
        If x < 0, or x = 0 with a <= 0 (the integral diverges there).
    OverflowError
        If x is large enough that e^{-x} underflows double precision.
    """
    if x < 0.0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x > _X_MAX:
        raise OverflowError(f"x = {x} exceeds exp underflow range ({_X_MAX})")
    if x == 0.0:
        if a <= 0.0:
            raise ValueError(f"gamma(a, 0) diverges for a = {a} <= 0")
        return float(sp.gamma(a))
    if a >= 1e-8:
        return float(sp.gammaincc(a, x) * sp.gamma(a))
    if x >= _CF_SWITCH:
        return _cf_upper(a, x)
    return _series_upper(a, x)


def normalization_constant(d: int, alpha: float, lam: float) -> float:
    """Normalization constant of the d-dimensional tempered operator.

    Two analytic branches: the classical fractional-Laplacian constant when
    lam = 0 or alpha = 1, and the tempered one otherwise.  They agree at
    alpha = 1 through the gamma reflection identity.

    Parameters
    ----------
    d : int
        Space dimension, 1, 2 or 3.
    alpha : float
        Fractional power, in (0, 2).
    lam : float
        Tempering (damping) parameter, >= 0.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must be in (0, 2), got {alpha}")
    if lam < 0.0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    front = 1.0 / (2.0 * math.sqrt(math.pi**d))
    if lam == 0.0 or alpha == 1.0:
        val = 2.0**alpha * alpha * sp.gamma((d + alpha) / 2.0) / sp.gamma(1.0 - alpha / 2.0)
    else:
        val = sp.gamma(d / 2.0) / abs(sp.gamma(-alpha))
    return front * float(val)
