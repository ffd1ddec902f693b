# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar kernels for the log-gamma family.

Same algorithms as the numpy fallback in pykernels.py (Lanczos g = 7 with
9 coefficients for lgamma; recurrence plus de Moivre asymptotics for
digamma/trigamma) but evaluated in a single pass per element instead of
one numpy pass per series term.  Arguments are assumed positive.
"""

from libc.math cimport log, sin, M_PI

import numpy as np

cdef double _G = 7.0
cdef double _HALF_LOG_TWO_PI = 0.91893853320467274178
cdef double _SHIFT = 10.0

cdef double[9] _COEF
_COEF[0] = 0.99999999999980993
_COEF[1] = 676.5203681218851
_COEF[2] = -1259.1392167224028
_COEF[3] = 771.32342877765313
_COEF[4] = -176.61502916214059
_COEF[5] = 12.507343278686905
_COEF[6] = -0.13857109526572012
_COEF[7] = 9.9843695780195716e-6
_COEF[8] = 1.5056327351493116e-7


cdef double _lgamma_half_up(double z) noexcept nogil:
    # Lanczos series, valid for z >= 0.5.
    cdef double w = z - 1.0
    cdef double series = _COEF[0]
    cdef int i
    for i in range(1, 9):
        series += _COEF[i] / (w + i)
    cdef double t = w + _G + 0.5
    return _HALF_LOG_TWO_PI + (w + 0.5) * log(t) - t + log(series)


cdef double _lgamma1(double x) noexcept nogil:
    if x < 0.5:
        return log(M_PI / sin(M_PI * x)) - _lgamma_half_up(1.0 - x)
    return _lgamma_half_up(x)


cdef double _digamma1(double x) noexcept nogil:
    cdef double acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    cdef double inv = 1.0 / x
    cdef double inv2 = inv * inv
    cdef double series = inv2 * (
        1.0 / 12.0
        - inv2 * (
            1.0 / 120.0
            - inv2 * (
                1.0 / 252.0
                - inv2 * (
                    1.0 / 240.0
                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))
                )
            )
        )
    )
    return acc + log(x) - 0.5 * inv - series


cdef double _trigamma1(double x) noexcept nogil:
    cdef double acc = 0.0
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    cdef double inv = 1.0 / x
    cdef double inv2 = inv * inv
    cdef double series = 1.0 + inv * (
        0.5
        + inv * (
            1.0 / 6.0
            - inv2 * (
                1.0 / 30.0
                - inv2 * (
                    1.0 / 42.0
                    - inv2 * (
                        1.0 / 30.0
                        - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))
                    )
                )
            )
        )
    )
    return acc + inv * series


def lgamma(x):
    """Natural log of the gamma function, elementwise, for positive x."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    cdef const double[::1] xv = arr.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _lgamma1(xv[i])
    return out


def digamma(x):
    """Logarithmic derivative of the gamma function, elementwise, x > 0."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    cdef const double[::1] xv = arr.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _digamma1(xv[i])
    return out


def trigamma(x):
    """Derivative of digamma, elementwise, x > 0."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    cdef const double[::1] xv = arr.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _trigamma1(xv[i])
    return out
