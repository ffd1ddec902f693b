"""Vectorized numpy implementations of the log-gamma family.

These are the fallback kernels used when the compiled extension is not
available.  Both backends implement the same algorithms:

* ``lgamma``: Lanczos approximation (g = 7, 9 coefficients, the widely
  published double precision set attributed to Godfrey), with the reflection
  formula for arguments below 1/2.
* ``digamma`` / ``trigamma``: upward recurrence to shift the argument to
  at least 10, then the de Moivre asymptotic series with Bernoulli-number
  coefficients.

All three achieve relative error below 1e-10 on (0, 1e6) against extended
precision references; the test suite pins this down against mpmath.
Arguments are assumed positive; behaviour for non-positive input is
unspecified (callers validate their own domains).
"""

import numpy as np

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)

_HALF_LOG_TWO_PI = 0.5 * np.log(2.0 * np.pi)

# How far the recurrence shifts arguments before the asymptotic series is
# applied.  At 10 the truncated series is accurate to ~1e-15 relative.
_PSI_SHIFT = 10.0


def _lgamma_half_up(z: np.ndarray) -> np.ndarray:
    """Lanczos series, valid for z >= 0.5."""
    w = z - 1.0
    series = np.full(w.shape, _LANCZOS_COEF[0])
    for i in range(1, _LANCZOS_COEF.size):
        series += _LANCZOS_COEF[i] / (w + i)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (w + 0.5) * np.log(t) - t + np.log(series)


def lgamma(x) -> np.ndarray:
    """Natural log of the gamma function, elementwise, for positive x."""
    x = np.asarray(x, dtype=np.float64)
    small = x < 0.5
    z = np.where(small, 1.0 - x, x)
    out = _lgamma_half_up(z)
    if np.any(small):
        xs = x[small]
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - out[small]
    return out


def digamma(x) -> np.ndarray:
    """Logarithmic derivative of the gamma function, elementwise, x > 0."""
    x = np.array(x, dtype=np.float64, copy=True)
    acc = np.zeros_like(x)
    # psi(x) = psi(x + 1) - 1/x; at most ten shifts reach _PSI_SHIFT.
    for _ in range(int(_PSI_SHIFT)):
        mask = x < _PSI_SHIFT
        if not mask.any():
            break
        acc[mask] -= 1.0 / x[mask]
        x[mask] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (
        1.0 / 12.0
        - inv2
        * (
            1.0 / 120.0
            - inv2
            * (
                1.0 / 252.0
                - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0)))
            )
        )
    )
    return acc + np.log(x) - 0.5 * inv - series


def trigamma(x) -> np.ndarray:
    """Derivative of digamma, elementwise, x > 0."""
    x = np.array(x, dtype=np.float64, copy=True)
    acc = np.zeros_like(x)
    # psi'(x) = psi'(x + 1) + 1/x^2
    for _ in range(int(_PSI_SHIFT)):
        mask = x < _PSI_SHIFT
        if not mask.any():
            break
        acc[mask] += 1.0 / (x[mask] * x[mask])
        x[mask] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 1.0 + inv * (
        0.5
        + inv
        * (
            1.0 / 6.0
            - inv2
            * (
                1.0 / 30.0
                - inv2
                * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))
            )
        )
    )
    return acc + inv * series
