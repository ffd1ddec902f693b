"""The reverse-mode tape: forward semantics, gradients, and contracts."""

import math
import zlib

import numpy as np
import pytest

from gel import autodiff as ad
from gel.errors import ContractError, DimensionError, DomainError
from helpers import gradcheck


def scalar(build):
    """Evaluate build on a fresh tape, return (output tensor, tape)."""
    tape = ad.Tape()
    return build(tape), tape


# ---------------------------------------------------------------------------
# tape and tensor basics


def test_leaf_is_copied_and_frozen():
    src = np.array([[1.0, 2.0]])
    tape = ad.Tape()
    t = tape.leaf(src)
    src[0, 0] = 99.0
    assert t.value[0, 0] == 1.0
    with pytest.raises(ValueError):
        t.value[0, 0] = 5.0


def test_leaf_rejects_non_2d():
    tape = ad.Tape()
    with pytest.raises(DimensionError):
        tape.leaf(np.ones(3))
    with pytest.raises(DimensionError):
        tape.leaf(np.ones((2, 2, 2)))


def test_leaf_rejects_non_finite():
    tape = ad.Tape()
    with pytest.raises(ContractError):
        tape.leaf(np.array([[np.inf]]))


def test_cross_tape_mixing_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    a = t1.leaf(np.ones((2, 2)))
    b = t2.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.add(a, b)


def test_operator_sugar_matches_functions():
    tape = ad.Tape()
    a = tape.leaf(np.array([[2.0, 3.0]]))
    b = tape.leaf(np.array([[4.0, 5.0]]))
    assert np.array_equal((a + b).value, ad.add(a, b).value)
    assert np.array_equal((a * b).value, ad.mul(a, b).value)
    assert np.array_equal((a - b).value, ad.sub(a, b).value)
    assert np.array_equal((-a).value, ad.negate(a).value)
    assert np.array_equal((a / b).value, ad.div(a, b).value)
    assert np.array_equal((a + 1.0).value, np.array([[3.0, 4.0]]))
    assert np.array_equal((2.0 * a).value, np.array([[4.0, 6.0]]))


# ---------------------------------------------------------------------------
# forward semantics


def test_matmul_forward_and_shape_check():
    tape = ad.Tape()
    a = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
    i = tape.leaf(np.eye(2))
    assert np.array_equal(ad.matmul(a, i).value, a.value)
    bad = tape.leaf(np.ones((3, 3)))
    with pytest.raises(DimensionError):
        ad.matmul(a, bad)


def test_elementwise_values():
    tape = ad.Tape()
    x = tape.leaf(np.array([[-3.0, 0.0, 3.0]]))
    assert np.array_equal(ad.relu(x).value, [[0.0, 0.0, 3.0]])
    assert np.array_equal(ad.absolute(x).value, [[3.0, 0.0, 3.0]])
    assert ad.sigmoid(x).value[0, 1] == 0.5
    assert np.allclose(ad.tanh(x).value, np.tanh(x.value))


def test_sigmoid_extreme_arguments_stay_finite():
    tape = ad.Tape()
    x = tape.leaf(np.array([[-800.0, 800.0]]))
    out = ad.sigmoid(x).value
    assert np.all(np.isfinite(out))
    assert out[0, 0] == pytest.approx(0.0, abs=1e-300)
    assert out[0, 1] == pytest.approx(1.0)


def test_log_domain_error():
    tape = ad.Tape()
    x = tape.leaf(np.array([[1.0, 0.0]]))
    with pytest.raises(DomainError):
        ad.log(x)


def test_lgamma_and_digamma_values():
    tape = ad.Tape()
    x = tape.leaf(np.array([[0.5]]))
    assert ad.lgamma(x).value[0, 0] == pytest.approx(0.5 * math.log(math.pi), rel=1e-12)
    with pytest.raises(DomainError):
        ad.lgamma(tape.leaf(np.array([[-1.0]])))
    with pytest.raises(DomainError):
        ad.digamma(tape.leaf(np.array([[0.0]])))


def test_div_domain_error():
    tape = ad.Tape()
    a = tape.leaf(np.ones((1, 2)))
    b = tape.leaf(np.array([[1.0, 0.0]]))
    with pytest.raises(DomainError):
        ad.div(a, b)


def test_reductions():
    tape = ad.Tape()
    x = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert ad.reduce_sum(x).value[0, 0] == pytest.approx(10.0)
    assert np.array_equal(ad.reduce_sum(x, "rows").value, [[4.0, 6.0]])
    assert np.array_equal(ad.reduce_sum(x, "cols").value, [[3.0], [7.0]])
    assert ad.reduce_mean(x).value[0, 0] == pytest.approx(2.5)
    # Collapsing the column axis of a row vector averages its entries.
    y = tape.leaf(np.array([[2.0, 4.0]]))
    assert np.array_equal(ad.reduce_mean(y, "cols").value, [[3.0]])
    with pytest.raises(ContractError):
        ad.reduce_sum(x, "diagonal")


def test_shape_ops_forward():
    tape = ad.Tape()
    a = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = tape.leaf(np.array([[5.0], [6.0]]))
    cat = ad.concat_cols(a, b)
    assert np.array_equal(cat.value, [[1.0, 2.0, 5.0], [3.0, 4.0, 6.0]])
    assert np.array_equal(ad.slice_cols(cat, 1, 3).value, [[2.0, 5.0], [4.0, 6.0]])
    gathered = ad.gather_rows(a, np.array([1, 0, 1]))
    assert np.array_equal(gathered.value, [[3.0, 4.0], [1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(DimensionError):
        ad.gather_rows(a, np.array([2]))
    with pytest.raises(DimensionError):
        ad.slice_cols(a, 1, 5)


def test_add_rowvec_forward():
    tape = ad.Tape()
    x = tape.leaf(np.zeros((2, 3)))
    b = tape.leaf(np.array([[1.0, 2.0, 3.0]]))
    out = ad.add_rowvec(x, b)
    assert np.array_equal(out.value, [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    with pytest.raises(DimensionError):
        ad.add_rowvec(x, tape.leaf(np.ones((1, 2))))


# ---------------------------------------------------------------------------
# backward pass


def test_backward_requires_scalar_output():
    tape = ad.Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.backward(x)


def test_square_gradient():
    # d(x^2)/dx = 2x = 6 at x = 3
    tape = ad.Tape()
    x = tape.leaf(np.array([[3.0]]))
    grads = ad.backward(ad.reduce_sum(ad.mul(x, x)))
    assert grads[x][0, 0] == pytest.approx(6.0)


def test_lgamma_plus_log_gradient():
    # d/dx [lgamma(x) + log(x)] at 2 = digamma(2) + 1/2
    tape = ad.Tape()
    x = tape.leaf(np.array([[2.0]]))
    out = ad.reduce_sum(ad.add(ad.lgamma(x), ad.log(x)))
    grads = ad.backward(out)
    assert grads[x][0, 0] == pytest.approx(0.9227843350984671, rel=1e-10)


def test_tanh_gradient_at_zero():
    tape = ad.Tape()
    x = tape.leaf(np.zeros((1, 1)))
    grads = ad.backward(ad.reduce_sum(ad.tanh(x)))
    assert grads[x][0, 0] == pytest.approx(1.0)


def test_matmul_gradient_analytic():
    rng = np.random.default_rng(7)
    a_val = rng.standard_normal((3, 4))
    b_val = rng.standard_normal((4, 2))
    tape = ad.Tape()
    a, b = tape.leaf(a_val), tape.leaf(b_val)
    grads = ad.backward(ad.reduce_sum(ad.matmul(a, b)))
    ones = np.ones((3, 2))
    assert np.allclose(grads[a], ones @ b_val.T)
    assert np.allclose(grads[b], a_val.T @ ones)


def test_unused_leaf_gets_zero_gradient():
    tape = ad.Tape()
    x = tape.leaf(np.ones((1, 1)))
    y = tape.leaf(np.ones((2, 2)))
    grads = ad.backward(ad.reduce_sum(x))
    assert np.array_equal(grads[y], np.zeros((2, 2)))
    assert grads[x][0, 0] == 1.0


def test_constant_gets_no_gradient_entry():
    tape = ad.Tape()
    x = tape.leaf(np.ones((1, 1)))
    c = tape.constant(np.full((1, 1), 3.0))
    grads = ad.backward(ad.reduce_sum(ad.mul(x, c)))
    assert c not in grads
    assert grads[x][0, 0] == pytest.approx(3.0)


def test_backward_twice_is_identical():
    rng = np.random.default_rng(3)
    tape = ad.Tape()
    x = tape.leaf(rng.uniform(0.5, 2.0, (3, 3)))
    w = tape.leaf(rng.standard_normal((3, 3)))
    out = ad.reduce_sum(ad.lgamma(ad.add(ad.mul(ad.sigmoid(ad.matmul(x, w)), 2.0), 0.5)))
    first = ad.backward(out)
    second = ad.backward(out)
    for leaf in (x, w):
        assert np.array_equal(first[leaf], second[leaf])


def test_gradient_accumulates_over_reuse():
    # y = x + x => dy/dx = 2
    tape = ad.Tape()
    x = tape.leaf(np.ones((1, 1)))
    grads = ad.backward(ad.reduce_sum(ad.add(x, x)))
    assert grads[x][0, 0] == pytest.approx(2.0)


def test_matmul_associativity():
    rng = np.random.default_rng(11)
    a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
    tape = ad.Tape()
    ta, tb, tc = tape.leaf(a), tape.leaf(b), tape.leaf(c)
    left = ad.matmul(ad.matmul(ta, tb), tc).value
    right = ad.matmul(ta, ad.matmul(tb, tc)).value
    assert np.allclose(left, right, atol=1e-10)


# ---------------------------------------------------------------------------
# finite-difference property over every operation

_POS = ("pos", 0.2, 5.0)  # away from the domain edge
_ANY = ("any", -2.0, 2.0)
_KINKLESS = ("kinkless", -2.0, 2.0)  # resampled away from 0 for relu/abs


def _draw(rng, kind, shape):
    name, lo, hi = kind
    x = rng.uniform(lo, hi, shape)
    if name == "kinkless":
        # keep entries at least 1e-3 from the subgradient kink at 0
        x = np.where(np.abs(x) < 1e-3, x + 0.1, x)
    return x


def _weighted_sum(tape, t):
    # Fixed weighting breaks symmetry so reductions see distinct gradients.
    rows, cols = t.shape
    w = tape.constant(np.arange(1.0, rows * cols + 1.0).reshape(rows, cols))
    return ad.reduce_sum(ad.mul(t, w))


OP_CASES = {
    "matmul": ([((2, 3), _ANY), ((3, 2), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.matmul(a, b))),
    "add": ([((2, 3), _ANY), ((2, 3), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.add(a, b))),
    "sub": ([((2, 3), _ANY), ((2, 3), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.sub(a, b))),
    "hadamard": ([((2, 3), _ANY), ((2, 3), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.mul(a, b))),
    "div": ([((2, 3), _ANY), ((2, 3), _POS)], lambda tp, a, b: _weighted_sum(tp, ad.div(a, b))),
    "add_scalar": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.add(a, 1.7))),
    "mul_scalar": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.mul(a, -0.3))),
    "add_rowvec": ([((3, 2), _ANY), ((1, 2), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.add_rowvec(a, b))),
    "negate": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.negate(a))),
    "abs": ([((2, 3), _KINKLESS)], lambda tp, a: _weighted_sum(tp, ad.absolute(a))),
    "relu": ([((2, 3), _KINKLESS)], lambda tp, a: _weighted_sum(tp, ad.relu(a))),
    "sigmoid": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.sigmoid(a))),
    "tanh": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.tanh(a))),
    "log": ([((2, 3), _POS)], lambda tp, a: _weighted_sum(tp, ad.log(a))),
    "exp": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.exp(a))),
    "lgamma": ([((2, 3), _POS)], lambda tp, a: _weighted_sum(tp, ad.lgamma(a))),
    "digamma": ([((2, 3), _POS)], lambda tp, a: _weighted_sum(tp, ad.digamma(a))),
    "sum_all": ([((2, 3), _ANY)], lambda tp, a: ad.reduce_sum(a)),
    "sum_rows": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.reduce_sum(a, "rows"))),
    "sum_cols": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.reduce_sum(a, "cols"))),
    "mean_all": ([((2, 3), _ANY)], lambda tp, a: ad.reduce_mean(a)),
    "mean_rows": ([((2, 3), _ANY)], lambda tp, a: _weighted_sum(tp, ad.reduce_mean(a, "rows"))),
    "concat_cols": ([((2, 2), _ANY), ((2, 3), _ANY)], lambda tp, a, b: _weighted_sum(tp, ad.concat_cols(a, b))),
    "slice_cols": ([((2, 4), _ANY)], lambda tp, a: _weighted_sum(tp, ad.slice_cols(a, 1, 3))),
    "gather_rows": (
        [((4, 2), _ANY)],
        lambda tp, a: _weighted_sum(tp, ad.gather_rows(a, np.array([0, 2, 2, 3]))),
    ),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_finite_difference_agreement(name):
    specs, builder = OP_CASES[name]
    tag = zlib.crc32(name.encode())
    for instance in range(100):
        rng = np.random.default_rng((tag, instance))
        arrays = [_draw(rng, kind, shape) for shape, kind in specs]
        gradcheck(lambda tp, leaves: builder(tp, *leaves), arrays)
