"""Numerical kernels shared by the analytic modules.

Exponential integral, adaptive Gauss-Kronrod quadrature (with a
change of variables for semi-infinite ranges) and a bracketing root
finder.  Everything here is a pure function.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209008240243


class NumericalError(ArithmeticError):
    """Base class for numerical failures raised by this package."""


class QuadratureError(NumericalError):
    """Adaptive quadrature ran out of subdivisions.

    ``estimate`` and ``error`` carry the best result reached.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(NumericalError):
    pass


class RootConvergenceError(NumericalError):
    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_subdivisions: int = 60

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class RootSpec:
    tolerance: float = 1e-12
    max_iterations: int = 200

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("root tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


DEFAULT_QUAD = QuadratureSpec()
DEFAULT_ROOT = RootSpec()


# ---------------------------------------------------------------------------
# Exponential integral E1
# ---------------------------------------------------------------------------

def _e1_series(x):
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < 1e-17 * abs(total) or k > 200:
            break
        k += 1
    return -EULER_GAMMA - math.log(x) - total


def _e1_scaled_cf(x):
    """e^x E1(x) by the modified Lentz continued fraction (x >= 1)."""
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericalError(f"E1 continued fraction did not converge at x={x}")


def _check_positive(x):
    x = float(x)
    if not x > 0:
        raise ValueError(f"exponential integral requires x > 0, got {x}")
    return x


def exp_integral_e1(x):
    """E1(x) = integral of e^-u / u over [x, inf), for x > 0."""
    x = _check_positive(x)
    if x < 1.0:
        return _e1_series(x)
    if x > 745.0:
        return 0.0
    return math.exp(-x) * _e1_scaled_cf(x)


def exp_scaled_e1(x):
    """e^x * E1(x).  Finite for every x > 0, unlike the unscaled product."""
    x = _check_positive(x)
    if x < 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_cf(x)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod (7/15) quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
# full 15-node rule on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_K15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G7 = np.zeros(15)
_G7[[1, 3, 5]] = _WG[:3]
_G7[7] = _WG[3]
_G7[[9, 11, 13]] = _WG[2::-1]


def _as_vectorized(f):
    def g(x):
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(xi))) for xi in x])
    return g


def _gk15(g, a, b):
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        fx = g(center + half * _NODES)
    if not np.all(np.isfinite(fx)):
        raise NumericalError(f"integrand not finite on [{a}, {b}]")
    k = half * float(_K15 @ fx)
    gauss = half * float(_G7 @ fx)
    return k, abs(k - gauss)


def integrate(f: Callable, lower: float, upper: float = math.inf,
              spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[lower, upper]``.

    ``f`` should accept a numpy array (scalar callables are tolerated but
    slow).  An infinite ``upper`` is mapped onto [0, 1) with
    u = lower + t / (1 - t).

    Raises QuadratureError when ``spec.max_subdivisions`` intervals are not
    enough to meet max(abs_tol, rel_tol * |I|).
    """
    lower = float(lower)
    upper = float(upper)
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if math.isinf(lower):
        raise ValueError("lower limit must be finite")
    g = _as_vectorized(f)
    if math.isinf(upper):
        base = g

        def g(t, base=base, a=lower):
            s = 1.0 - t
            return base(a + t / s) / (s * s)

        lower, upper = 0.0, 1.0

    # max-heap on error estimate
    value, err = _gk15(g, lower, upper)
    heap = [(-err, lower, upper, value)]
    total, total_err = value, err
    while True:
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= tol:
            return total
        if len(heap) >= spec.max_subdivisions:
            raise QuadratureError(
                f"quadrature did not converge in {spec.max_subdivisions} subdivisions "
                f"(estimate {total!r}, error {total_err:.3g})", total, total_err)
        neg_err, a, b, v = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _gk15(g, a, m)
        v2, e2 = _gk15(g, m, b)
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        # re-sum rather than update incrementally to avoid drift
        total = math.fsum(item[3] for item in heap)
        total_err = math.fsum(-item[0] for item in heap)


# ---------------------------------------------------------------------------
# Bracketing root finder
# ---------------------------------------------------------------------------

def find_root(g: Callable[[float], float], lower: float, upper: float,
              spec: RootSpec = DEFAULT_ROOT, max_expansions: int = 60) -> float:
    """Root of a monotone function by bracketed bisection.

    If g(lower) and g(upper) share a sign, ``upper`` is doubled (relative to
    ``lower``) until the sign changes or ``max_expansions`` is hit.  When the
    target sits at or below the bracket, ``lower`` is returned provided
    |g(lower)| <= tolerance.  g may return +/-inf.
    """
    lo, hi = float(lower), float(upper)
    if not lo < hi:
        raise ValueError("need lower < upper")
    g_lo = g(lo)
    if g_lo == 0.0:
        return lo
    g_hi = g(hi)
    width = hi - lo
    n = 0
    while np.sign(g_hi) == np.sign(g_lo):
        if abs(g_lo) <= spec.tolerance:
            return lo
        if n >= max_expansions:
            raise BracketError(f"no sign change on [{lo}, {hi}]")
        # a sign matching g(lower) at the far end means we must search upward;
        # if g is moving away from zero there is nothing to find
        if abs(g_hi) >= abs(g_lo) and n > 0 and np.isfinite(g_hi):
            raise BracketError(f"no sign change on [{lo}, {hi}] and |g| is growing")
        width *= 2.0
        hi = lo + width
        g_hi = g(hi)
        n += 1
    if g_hi == 0.0:
        return hi
    for _ in range(spec.max_iterations):
        mid = 0.5 * (lo + hi)
        if hi - lo <= spec.tolerance or mid in (lo, hi):
            return mid
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    raise RootConvergenceError(
        f"bisection did not reach tolerance {spec.tolerance} in "
        f"{spec.max_iterations} iterations", 0.5 * (lo + hi))
