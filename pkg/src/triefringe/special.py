"""Complex log-gamma and small numeric helpers."""

from __future__ import annotations

import cmath
import math

from .errors import PoleAtNonpositiveInteger

# Lanczos approximation, g = 7, n = 9
_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _wrap(z: complex) -> complex:
    im = math.remainder(z.imag, 2.0 * math.pi)
    if im <= -math.pi:
        im += 2.0 * math.pi
    return complex(z.real, im)


def _log_sin_pi(s: complex) -> complex:
    # log sin(pi s) without overflow for large |Im s|
    y = math.pi * s.imag
    if abs(y) < 300.0:
        return cmath.log(cmath.sin(math.pi * s))
    if y > 0:
        # sin(pi s) = (i/2) e^{-i pi s} (1 - e^{2 i pi s})
        return cmath.log(0.5j) - 1j * math.pi * s + cmath.log(1.0 - cmath.exp(2j * math.pi * s))
    return cmath.log(-0.5j) + 1j * math.pi * s + cmath.log(1.0 - cmath.exp(-2j * math.pi * s))


def _lanczos(s: complex) -> complex:
    z = s - 1.0
    acc = complex(_COEF[0])
    for k in range(1, len(_COEF)):
        acc += _COEF[k] / (z + k)
    t = z + _G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(acc)


def complex_log_gamma(s: complex) -> complex:
    """log Gamma(s) with the imaginary part reduced to (-pi, pi]."""
    s = complex(s)
    if s.imag == 0.0 and s.real <= 0.0 and s.real == math.floor(s.real):
        raise PoleAtNonpositiveInteger(f"Gamma has a pole at {s.real:g}")
    if s.real < 0.5:
        val = math.log(math.pi) - _log_sin_pi(s) - _lanczos(1.0 - s)
    else:
        val = _lanczos(s)
    return _wrap(val)


def complex_gamma(s: complex) -> complex:
    return cmath.exp(complex_log_gamma(s))
