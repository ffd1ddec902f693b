"""Special-function kernels against extended-precision references."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gel import _kernels
from gel._kernels import pykernels

BACKENDS = [pytest.param(pykernels, id="python")]
if _kernels.BACKEND == "cython":
    BACKENDS.append(pytest.param(_kernels, id="cython"))


def _mixed_err(got, want):
    return abs(got - want) / max(1.0, abs(want))


@pytest.fixture(scope="module")
def grid():
    # Log-spaced sweep of the supported domain plus awkward spots: the
    # reflection boundary, lgamma zeros, and near-integer arguments.
    return np.concatenate(
        [
            np.logspace(-8, 6, 400),
            np.array([0.5, 1.0, 2.0, 0.4999999, 0.5000001, 0.9999999, 1.0000001, 9.999999, 10.000001]),
        ]
    )


@pytest.mark.parametrize("impl", BACKENDS)
class TestAgainstMpmath:
    def test_lgamma(self, impl, grid):
        got = impl.lgamma(grid)
        for x, g in zip(grid, got):
            want = float(mp.loggamma(mp.mpf(float(x))))
            assert _mixed_err(g, want) < 1e-10, f"x={x}"

    def test_digamma(self, impl, grid):
        got = impl.digamma(grid)
        for x, g in zip(grid, got):
            want = float(mp.digamma(mp.mpf(float(x))))
            assert _mixed_err(g, want) < 1e-10, f"x={x}"

    def test_trigamma(self, impl, grid):
        got = impl.trigamma(grid)
        for x, g in zip(grid, got):
            want = float(mp.polygamma(1, mp.mpf(float(x))))
            assert _mixed_err(g, want) < 1e-10, f"x={x}"


@pytest.mark.parametrize("impl", BACKENDS)
def test_known_values(impl):
    assert impl.lgamma(np.array(1.0)) == pytest.approx(0.0, abs=1e-12)
    assert impl.lgamma(np.array(2.0)) == pytest.approx(0.0, abs=1e-12)
    # Gamma(1/2) = sqrt(pi)
    assert impl.lgamma(np.array(0.5)) == pytest.approx(
        0.5 * math.log(math.pi), rel=1e-12
    )
    # digamma(1) is minus the Euler-Mascheroni constant
    assert impl.digamma(np.array(1.0)) == pytest.approx(
        -0.5772156649015329, rel=1e-12
    )
    # trigamma(1) = pi^2 / 6
    assert impl.trigamma(np.array(1.0)) == pytest.approx(
        math.pi**2 / 6.0, rel=1e-12
    )


@pytest.mark.parametrize("impl", BACKENDS)
def test_digamma_is_lgamma_derivative(impl):
    # Central differences of lgamma at a few interior points.
    for x in (0.5, 1.7, 9.3, 123.4):
        h = 1e-6
        fd = (
            impl.lgamma(np.array(x + h)) - impl.lgamma(np.array(x - h))
        ) / (2 * h)
        assert float(fd) == pytest.approx(
            float(impl.digamma(np.array(x))), rel=1e-6
        )


@pytest.mark.parametrize("impl", BACKENDS)
def test_trigamma_is_digamma_derivative(impl):
    for x in (0.5, 1.7, 9.3, 123.4):
        h = 1e-6
        fd = (
            impl.digamma(np.array(x + h)) - impl.digamma(np.array(x - h))
        ) / (2 * h)
        assert float(fd) == pytest.approx(
            float(impl.trigamma(np.array(x))), rel=1e-5
        )


@pytest.mark.parametrize("impl", BACKENDS)
def test_shape_and_dtype_preserved(impl):
    x = np.array([[0.5, 1.5], [2.5, 3.5]])
    out = impl.lgamma(x)
    assert out.shape == x.shape
    assert out.dtype == np.float64


@pytest.mark.parametrize("impl", BACKENDS)
def test_readonly_input_accepted(impl):
    x = np.array([[1.0, 2.0]])
    x.flags.writeable = False
    assert np.all(np.isfinite(impl.digamma(x)))


@pytest.mark.parametrize("impl", BACKENDS)
@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e5))
def test_lgamma_recurrence(impl, x):
    # lgamma(x + 1) = lgamma(x) + log(x)
    lhs = float(impl.lgamma(np.array(x + 1.0)))
    rhs = float(impl.lgamma(np.array(x))) + math.log(x)
    assert _mixed_err(lhs, rhs) < 1e-10


@pytest.mark.skipif(
    _kernels.BACKEND != "cython", reason="compiled backend not built"
)
def test_backend_parity():
    xs = np.concatenate([np.logspace(-8, 6, 500), [0.5, 1.0, 2.0]])
    for name in ("lgamma", "digamma", "trigamma"):
        compiled = getattr(_kernels, name)(xs)
        fallback = getattr(pykernels, name)(xs)
        err = np.abs(compiled - fallback) / np.maximum(1.0, np.abs(fallback))
        assert err.max() < 1e-12, name
