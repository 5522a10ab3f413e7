"""Complex Gamma function, Gauss hypergeometric series and the connection
coefficient that decides whether a mode is regular at both rho = 0 and rho = 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

__all__ = [
    "PoleError",
    "DegenerateCaseError",
    "ConvergenceError",
    "HypergeometricParams",
    "gamma_complex",
    "reciprocal_gamma",
    "hyp2f1",
    "wave_params",
    "connection_coefficient_c1",
]

# distance from an integer of c - a - b below which the 1 - z connection is
# treated as the logarithmic case
DEGENERATE_BAND = 1e-6
MAX_TERMS = 100_000


class PoleError(ArithmeticError):
    """Gamma evaluated at a nonpositive integer."""


class DegenerateCaseError(ArithmeticError):
    """c - a - b is an integer: the 1 - z connection formula has log terms."""


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class HypergeometricParams:
    a: complex
    b: complex
    c: complex


# Lanczos approximation with g = 671/128 and 14 partial fractions
# (Numerical Recipes, 3rd ed., gammln); relative accuracy ~1e-15 for Re z >= 1/2.
_LANCZOS_G_HALF = 5.24218750000000000
_LANCZOS_C0 = 0.999999999999997092
_LANCZOS_COEF = (
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
)
_SQRT_2PI = 2.5066282746310005


def _is_pole(z: complex) -> bool:
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def _sinpi(z: complex) -> complex:
    # reduce by the nearest integer first so sin(pi z) keeps relative accuracy
    # near its zeros
    k = round(z.real)
    s = cmath.sin(math.pi * (z - k))
    return -s if k % 2 else s


def _log_gamma_lanczos(z: complex) -> complex:
    tmp = z + _LANCZOS_G_HALF
    tmp = (z + 0.5) * cmath.log(tmp) - tmp
    ser = _LANCZOS_C0
    y = z
    for c in _LANCZOS_COEF:
        y = y + 1.0
        ser += c / y
    return tmp + cmath.log(_SQRT_2PI * ser / z)


def gamma_complex(z) -> complex:
    """Gamma(z) for complex z; reflection for Re z < 1/2."""
    z = complex(z)
    if _is_pole(z):
        raise PoleError(f"Gamma has a pole at z = {z.real:g}")
    if z.real < 0.5:
        return math.pi / (_sinpi(z) * cmath.exp(_log_gamma_lanczos(1.0 - z)))
    return cmath.exp(_log_gamma_lanczos(z))


def reciprocal_gamma(z) -> complex:
    """1/Gamma(z), entire; exactly 0 at z = 0, -1, -2, ..."""
    z = complex(z)
    if _is_pole(z):
        return 0j
    if z.real < 0.5:
        return _sinpi(z) * cmath.exp(_log_gamma_lanczos(1.0 - z)) / math.pi
    return cmath.exp(-_log_gamma_lanczos(z))


def _series(a: complex, b: complex, c: complex, z: complex) -> complex:
    if _is_pole(c):
        raise PoleError(f"2F1 series undefined for c = {c.real:g}")
    total = 1.0 + 0j
    term = 1.0 + 0j
    small = 0
    for k in range(MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        if abs(term) < 1e-16 * abs(total):
            small += 1
            if small == 3:
                return total
        else:
            small = 0
    raise ConvergenceError(f"2F1({a}, {b}; {c}; {z}) did not converge in {MAX_TERMS} terms")


def _gauss_sum(a: complex, b: complex, c: complex) -> complex:
    # 2F1(a, b; c; 1) for Re(c - a - b) > 0
    return (gamma_complex(c) * gamma_complex(c - a - b)
            * reciprocal_gamma(c - a) * reciprocal_gamma(c - b))


def hyp2f1(params: HypergeometricParams, z) -> complex:
    """Gauss hypergeometric function 2F1(a, b; c; z).

    Direct series for |z| <= 1/2, the z -> 1 - z connection for |1 - z| < 1/2,
    Gauss summation at z = 1 when Re(c - a - b) > 0.
    """
    a, b, c = complex(params.a), complex(params.b), complex(params.c)
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    if abs(z) <= 0.5:
        return _series(a, b, c, z)
    s = c - a - b
    if z == 1:
        if s.real <= 0:
            raise ConvergenceError("2F1 diverges at z = 1 unless Re(c - a - b) > 0")
        return _gauss_sum(a, b, c)
    if abs(1.0 - z) >= 0.5:
        raise ValueError("hyp2f1 supports |z| <= 1/2 or |1 - z| < 1/2 only")
    if s.imag == 0.0 and abs(s.real - round(s.real)) < DEGENERATE_BAND:
        raise DegenerateCaseError(f"c - a - b = {s.real:g} is an integer")
    w = 1.0 - z
    gc = gamma_complex(c)
    first = gc * gamma_complex(s) * reciprocal_gamma(c - a) * reciprocal_gamma(c - b)
    second = gc * gamma_complex(-s) * reciprocal_gamma(a) * reciprocal_gamma(b)
    out = 0j
    if first != 0:
        out += first * _series(a, b, 1.0 - s, w)
    if second != 0:
        out += second * w**s * _series(c - a, c - b, 1.0 + s, w)
    return out


def wave_params(lam, pc0: float) -> HypergeometricParams:
    """(a, b, c) turning (t_0(lam) - p c_0) u = 0 into the hypergeometric equation in z = rho^2."""
    lam = complex(lam)
    root = cmath.sqrt(1.0 + 4.0 * pc0)
    return HypergeometricParams(
        a=0.25 * (-1.0 + 2.0 * lam - root),
        b=0.25 * (-1.0 + 2.0 * lam + root),
        c=0.5 + 0j,
    )


def connection_coefficient_c1(lam, cfg) -> complex:
    """Coefficient of the solution regular at z = 0 inside the solution analytic at z = 1.

    ``cfg`` is a NonlinearityConfig (anything with ``p`` and ``c0``).  Computed
    through reciprocal Gamma factors so the zeros are exact.
    """
    lam = complex(lam)
    if abs(lam - 1.0) < DEGENERATE_BAND:
        raise DegenerateCaseError("lambda = 1 gives c - a - b = 0")
    pr = wave_params(lam, cfg.p * cfg.c0)
    a, b, c = pr.a, pr.b, pr.c
    return (gamma_complex(a + b + 1.0 - c) * gamma_complex(1.0 - c)
            * reciprocal_gamma(a + 1.0 - c) * reciprocal_gamma(b + 1.0 - c))
