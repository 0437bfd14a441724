"""Special functions and the adaptive quadrature wrapper used by the engine.

Sine/cosine integrals
    ``si_ci`` uses the power series below ``x = 2`` and the complex
    continued fraction for ``E1(ix)`` (modified Lentz) above it.  Both
    branches reach ~1e-15 absolute accuracy; the switch point is where the
    series still has no cancellation and the fraction converges in < 40 terms.

Truncated Gaussian moments
    ``gaussian_tail_moment`` evaluates ``G(x, l) = int_x^inf (t-x)^(l-1) e^{-t^2} dt``
    scaled by ``exp(x^2)`` so that it never overflows, with an asymptotic series
    for large ``x`` where the erfc recursion would cancel.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import erfcx

from .errors import QuadratureError, SingularInputError

EULER_GAMMA = 0.57721566490153286061
SERIES_SWITCH = 2.0
_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 500


def _si_ci_scalar(x: float) -> tuple[float, float]:
    if x <= SERIES_SWITCH:
        # Si = sum (-1)^k x^(2k+1) / ((2k+1)(2k+1)!),  Ci = g + ln x + sum_{k>=1} (-1)^k x^(2k) / (2k (2k)!)
        x2 = x * x
        term = x
        big_si = x
        k = 0
        while True:
            k += 1
            term *= -x2 / ((2 * k) * (2 * k + 1))
            add = term / (2 * k + 1)
            big_si += add
            if abs(add) < _EPS * abs(big_si):
                break
        term = 1.0
        s = 0.0
        k = 0
        while True:
            k += 1
            term *= -x2 / ((2 * k - 1) * (2 * k))
            add = term / (2 * k)
            s += add
            if abs(add) < _EPS * max(abs(s), 1e-300):
                break
        ci = EULER_GAMMA + math.log(x) + s
        return big_si - 0.5 * math.pi, ci

    b = complex(1.0, x)
    c = complex(1.0 / _FPMIN, 0.0)
    d = h = 1.0 / b
    for i in range(2, _MAXIT):
        a = -float((i - 1) * (i - 1))
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < _EPS:
            break
    else:  # pragma: no cover - never reached for finite x
        raise ArithmeticError("si/ci continued fraction failed to converge")
    h *= complex(math.cos(x), -math.sin(x))
    return h.imag, -h.real


def si_ci(x):
    """Return ``(si(x), ci(x))`` with ``si = Si - pi/2`` and ``ci = Ci``.

    Accepts scalars or arrays; ``ci`` is undefined for ``x <= 0``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise SingularInputError("ci(x) requires x > 0")
    if arr.ndim == 0:
        return _si_ci_scalar(float(arr))
    si = np.empty_like(arr)
    ci = np.empty_like(arr)
    for idx, v in np.ndenumerate(arr):
        si[idx], ci[idx] = _si_ci_scalar(float(v))
    return si, ci


def aux_f(x: float) -> float:
    """``ci(x) sin(x) - si(x) cos(x)``, the auxiliary function f of the pair."""
    si, ci = _si_ci_scalar(x)
    return ci * math.sin(x) - si * math.cos(x)


# --- truncated Gaussian moments --------------------------------------------------

_ASYMPTOTIC_SWITCH = 25.0


def scaled_tail_moment(x: float, ell: int) -> float:
    """``exp(x^2) * int_x^inf (t-x)^(ell-1) exp(-t^2) dt`` for ``x >= 0``."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x > _ASYMPTOTIC_SWITCH:
        total = 0.0
        two_x = 2.0 * x
        for k in range(60):
            term = (-1) ** k * math.factorial(ell - 1 + 2 * k) / (math.factorial(k) * two_x ** (ell + 2 * k))
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
        return total
    j_prev = 0.5 * math.sqrt(math.pi) * float(erfcx(x))  # power 0
    if ell == 1:
        return j_prev
    j_cur = 0.5 - x * j_prev  # power 1
    for n in range(2, ell):
        j_prev, j_cur = j_cur, 0.5 * (n - 1) * j_prev - x * j_cur
    return j_cur


def gaussian_tail_moment(x: float, ell: int) -> float:
    """Unscaled ``G(x, ell)``; underflows to 0 for large ``x``."""
    return math.exp(-x * x) * scaled_tail_moment(x, ell) if x < 27.0 else 0.0


def gaussian_tail_moment_printed(x: float, ell: int) -> float:
    """The two base cases exactly as erf expressions, recursion above ``ell = 2``."""
    g1 = -(math.sqrt(math.pi) * (math.erf(x) - 1.0)) / 2.0
    if ell == 1:
        return g1
    g2 = math.exp(-x * x) / 2.0 + (x * math.sqrt(math.pi) * (math.erf(x) - 1.0)) / 2.0
    prev, cur = g1, g2
    for n in range(2, ell):
        prev, cur = cur, 0.5 * (n - 1) * prev - x * cur
    return cur


def quartic_laplace_moment(ell: int, x1: float, x2: float) -> float:
    """``int_0^inf u^(ell-1) exp(-x1 u^2 - x2 u) du`` for ``x1 >= 0, x2 > 0``.

    Completing the square gives ``x1^(-ell/2) * scaled_tail_moment(x3, ell)``
    with ``x3 = x2 / (2 sqrt(x1))``; ``x1 = 0`` reduces to ``(ell-1)!/x2^ell``.
    """
    if x2 <= 0:
        raise ValueError("x2 must be positive")
    if x1 < 0:
        raise ValueError("x1 must be non-negative")
    if x1 == 0.0:
        return math.factorial(ell - 1) / x2 ** ell
    x3 = x2 / (2.0 * math.sqrt(x1))
    if x3 > _ASYMPTOTIC_SWITCH:
        # same asymptotic series, written in (x1, x2) so that x1 -> 0 is smooth
        total = 0.0
        for k in range(60):
            term = ((-1) ** k * x1 ** k * math.factorial(ell - 1 + 2 * k)
                    / (math.factorial(k) * x2 ** (ell + 2 * k)))
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
        return total
    return x1 ** (-0.5 * ell) * scaled_tail_moment(x3, ell)


# --- quadrature -----------------------------------------------------------------------

def quad(func, a: float, b: float, *, rel_tol: float = 1e-8, abs_tol: float = 0.0,
         points=None, limit: int = 200) -> float:
    """Adaptive Gauss-Kronrod quadrature with a hard failure policy.

    QUADPACK warnings are tolerated when its own error estimate is still
    within a hundred times the requested tolerance; anything worse raises
    :class:`QuadratureError`.
    """
    kw = {}
    if points is not None and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    val, err, info = integrate.quad(func, a, b, epsrel=rel_tol, epsabs=abs_tol,
                                    limit=limit, full_output=1, **kw)[:3]
    if not np.isfinite(val):
        raise QuadratureError(f"non-finite quadrature result on [{a}, {b}]")
    if err > 100.0 * max(abs_tol, rel_tol * abs(val)) and err > 1e-14:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] missed tolerance: value={val:.6g} err={err:.3g}")
    return float(val)


def quad_split(func, breaks, *, rel_tol: float = 1e-8, abs_tol: float = 0.0) -> float:
    """Sum :func:`quad` over consecutive breakpoints (last may be ``inf``)."""
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            total += quad(func, lo, hi, rel_tol=rel_tol, abs_tol=abs_tol)
    return total
