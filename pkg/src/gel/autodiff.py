"""Tape-based reverse-mode automatic differentiation over dense matrices.

Every value is a two-dimensional float64 numpy array.  A :class:`Tape`
records operations in execution order; :func:`backward` walks the recording
in reverse and returns gradients for the tape's differentiable leaves.
The tape is never mutated by backward, so repeated calls on the same output
produce identical gradients.

Design constraints:

* matrices only: no broadcasting except scalar-with-matrix (a dedicated
  ``add_rowvec`` handles the one bias pattern the models need);
* recorded values are frozen (numpy ``writeable`` flag cleared);
* reverse traversal relies on the recording order itself, in which parents
  always precede children, so no separate topological sort is required.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import ContractError, DimensionError, DomainError

Scalar = Union[int, float]


class Tensor:
    """A node on a tape: an immutable float64 matrix plus its provenance.

    Do not construct directly; use :meth:`Tape.leaf`, :meth:`Tape.constant`
    or the operations in this module.  Identity (not value) is what makes a
    tensor usable as a gradient key.
    """

    __slots__ = ("tape", "value", "op", "parents", "requires_grad", "_vjp", "_index")

    def __init__(self, tape, value, op, parents, requires_grad, vjp, index):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._vjp = vjp
        self._index = index

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def is_leaf(self) -> bool:
        return self._vjp is None

    def __repr__(self) -> str:
        kind = self.op if self.op else ("leaf" if self.requires_grad else "const")
        return f"Tensor({kind}, shape={self.shape}, node={self._index})"

    # Operator sugar; each delegates to the module-level operation.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(negate(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return negate(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered recording of operations; owns every tensor created on it."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, value, requires_grad: bool = True) -> Tensor:
        """Record an input matrix.  The value is copied and frozen."""
        arr = np.array(value, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise DimensionError(f"leaf value must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ContractError("leaf value contains non-finite entries")
        return self._record(arr, op="", parents=(), vjp=None, requires_grad=requires_grad)

    def constant(self, value) -> Tensor:
        """A leaf that never receives a gradient."""
        return self.leaf(value, requires_grad=False)

    def leaves(self) -> list[Tensor]:
        """Differentiable leaves in recording order."""
        return [t for t in self._nodes if t.is_leaf() and t.requires_grad]

    def _record(self, value, op, parents, vjp, requires_grad=False) -> Tensor:
        value.flags.writeable = False
        t = Tensor(self, value, op, parents, requires_grad, vjp, len(self._nodes))
        self._nodes.append(t)
        return t


class GradientSet(Mapping):
    """Gradients keyed by leaf tensor, as returned by :func:`backward`."""

    def __init__(self, grads: dict):
        self._grads = grads

    def __getitem__(self, key: Tensor) -> np.ndarray:
        return self._grads[key]

    def __iter__(self):
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self._grads.values())


def _check_tensor(x, name: str) -> None:
    if not isinstance(x, Tensor):
        raise ContractError(f"{name} must be a Tensor, got {type(x).__name__}")


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ContractError("operands live on different tapes")
    return tape


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# binary operations


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_tensor(a, "a")
    _check_tensor(b, "b")
    tape = _same_tape(a, b)
    if a.cols != b.rows:
        raise DimensionError(
            f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}"
        )
    av, bv = a.value, b.value

    def vjp(g):
        return g @ bv.T, av.T @ g

    return tape._record(av @ bv, "matmul", (a, b), vjp)


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    _check_tensor(a, "a")
    if isinstance(b, Tensor):
        tape = _same_tape(a, b)
        _same_shape(a, b, "add")

        def vjp(g):
            return g, g

        return tape._record(a.value + b.value, "add", (a, b), vjp)
    c = float(b)

    def vjp(g):
        return (g,)

    return a.tape._record(a.value + c, "add-scalar", (a,), vjp)


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    _check_tensor(a, "a")
    if isinstance(b, Tensor):
        tape = _same_tape(a, b)
        _same_shape(a, b, "sub")

        def vjp(g):
            return g, -g

        return tape._record(a.value - b.value, "sub", (a, b), vjp)
    return add(a, -float(b))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Hadamard product, or scalar scaling when b is a plain number."""
    _check_tensor(a, "a")
    if isinstance(b, Tensor):
        tape = _same_tape(a, b)
        _same_shape(a, b, "mul")
        av, bv = a.value, b.value

        def vjp(g):
            return g * bv, g * av

        return tape._record(av * bv, "hadamard", (a, b), vjp)
    c = float(b)

    def vjp(g):
        return (g * c,)

    return a.tape._record(a.value * c, "mul-scalar", (a,), vjp)


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient; the divisor must be nonzero everywhere."""
    _check_tensor(a, "a")
    _check_tensor(b, "b")
    tape = _same_tape(a, b)
    _same_shape(a, b, "div")
    if np.any(b.value == 0.0):
        raise DomainError("div: divisor has zero entries")
    av, bv = a.value, b.value

    def vjp(g):
        return g / bv, -g * av / (bv * bv)

    return tape._record(av / bv, "div", (a, b), vjp)


def add_rowvec(x: Tensor, b: Tensor) -> Tensor:
    """Add a 1 x c row vector to every row of an r x c matrix (bias add)."""
    _check_tensor(x, "x")
    _check_tensor(b, "b")
    tape = _same_tape(x, b)
    if b.shape != (1, x.cols):
        raise DimensionError(
            f"add_rowvec: bias shape {b.shape} does not match (1, {x.cols})"
        )

    def vjp(g):
        return g, g.sum(axis=0, keepdims=True)

    return tape._record(x.value + b.value, "add-rowvec", (x, b), vjp)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Horizontal concatenation: (r x c1, r x c2) -> r x (c1 + c2)."""
    _check_tensor(a, "a")
    _check_tensor(b, "b")
    tape = _same_tape(a, b)
    if a.rows != b.rows:
        raise DimensionError(
            f"concat_cols: row counts {a.rows} and {b.rows} differ"
        )
    split = a.cols

    def vjp(g):
        return g[:, :split], g[:, split:]

    return tape._record(np.concatenate([a.value, b.value], axis=1), "concat-cols", (a, b), vjp)


# ---------------------------------------------------------------------------
# elementwise unary operations


def _unary(x: Tensor, op: str, out: np.ndarray, dfdx: Callable[[], np.ndarray]) -> Tensor:
    def vjp(g):
        return (g * dfdx(),)

    return x.tape._record(out, op, (x,), vjp)


def negate(x: Tensor) -> Tensor:
    _check_tensor(x, "x")

    def vjp(g):
        return (-g,)

    return x.tape._record(-x.value, "negate", (x,), vjp)


def absolute(x: Tensor) -> Tensor:
    """Elementwise |x|; the derivative at 0 is taken as 0."""
    _check_tensor(x, "x")
    s = np.sign(x.value)
    return _unary(x, "abs", np.abs(x.value), lambda: s)


def relu(x: Tensor) -> Tensor:
    _check_tensor(x, "x")
    mask = (x.value > 0.0).astype(np.float64)
    return _unary(x, "relu", np.maximum(x.value, 0.0), lambda: mask)


def sigmoid(x: Tensor) -> Tensor:
    _check_tensor(x, "x")
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _unary(x, "sigmoid", out, lambda: out * (1.0 - out))


def tanh(x: Tensor) -> Tensor:
    _check_tensor(x, "x")
    out = np.tanh(x.value)
    return _unary(x, "tanh", out, lambda: 1.0 - out * out)


def log(x: Tensor) -> Tensor:
    _check_tensor(x, "x")
    if np.any(x.value <= 0.0):
        raise DomainError("log: argument has non-positive entries")
    v = x.value
    return _unary(x, "log", np.log(v), lambda: 1.0 / v)


def exp(x: Tensor) -> Tensor:
    _check_tensor(x, "x")
    out = np.exp(x.value)
    return _unary(x, "exp", out, lambda: out)


def lgamma(x: Tensor) -> Tensor:
    """Elementwise log-gamma; gradient flows through digamma."""
    _check_tensor(x, "x")
    if np.any(x.value <= 0.0):
        raise DomainError("lgamma: argument has non-positive entries")
    v = x.value
    return _unary(x, "lgamma", _kernels.lgamma(v), lambda: _kernels.digamma(v))


def digamma(x: Tensor) -> Tensor:
    """Elementwise digamma; gradient flows through trigamma."""
    _check_tensor(x, "x")
    if np.any(x.value <= 0.0):
        raise DomainError("digamma: argument has non-positive entries")
    v = x.value
    return _unary(x, "digamma", _kernels.digamma(v), lambda: _kernels.trigamma(v))


# ---------------------------------------------------------------------------
# shape operations


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns [start, stop) as a new r x (stop - start) tensor."""
    _check_tensor(x, "x")
    if not (0 <= start < stop <= x.cols):
        raise DimensionError(
            f"slice_cols: range [{start}, {stop}) invalid for {x.cols} columns"
        )
    shape = x.shape

    def vjp(g):
        buf = np.zeros(shape)
        buf[:, start:stop] = g
        return (buf,)

    return x.tape._record(x.value[:, start:stop].copy(), "slice-cols", (x,), vjp)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Rows of x selected by an integer index vector (repeats allowed)."""
    _check_tensor(x, "x")
    idx = np.asarray(indices)
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise ContractError("gather_rows: indices must be a 1-D integer array")
    if idx.size and (idx.min() < 0 or idx.max() >= x.rows):
        raise DimensionError(
            f"gather_rows: index out of range for {x.rows} rows"
        )
    idx = idx.copy()
    shape = x.shape

    def vjp(g):
        buf = np.zeros(shape)
        np.add.at(buf, idx, g)
        return (buf,)

    return x.tape._record(x.value[idx], "gather-rows", (x,), vjp)


# ---------------------------------------------------------------------------
# reductions

_AXES = {"all": None, "rows": 0, "cols": 1}


def reduce_sum(x: Tensor, axis: str = "all") -> Tensor:
    """Sum of entries: axis='all' -> 1x1, 'rows' -> 1xc, 'cols' -> rx1."""
    _check_tensor(x, "x")
    if axis not in _AXES:
        raise ContractError(f"axis must be one of {sorted(_AXES)}, got {axis!r}")
    np_axis = _AXES[axis]
    shape = x.shape
    if np_axis is None:
        out = np.full((1, 1), x.value.sum())
    else:
        out = x.value.sum(axis=np_axis, keepdims=True)

    def vjp(g):
        return (np.broadcast_to(g, shape).copy(),)

    return x.tape._record(out, f"sum-{axis}", (x,), vjp)


def reduce_mean(x: Tensor, axis: str = "all") -> Tensor:
    """Mean of entries; same axis convention as :func:`reduce_sum`."""
    _check_tensor(x, "x")
    if axis not in _AXES:
        raise ContractError(f"axis must be one of {sorted(_AXES)}, got {axis!r}")
    np_axis = _AXES[axis]
    count = x.value.size if np_axis is None else x.shape[np_axis]
    return mul(reduce_sum(x, axis), 1.0 / count)


# ---------------------------------------------------------------------------
# backward pass


def backward(output: Tensor) -> GradientSet:
    """Gradients of a scalar (1 x 1) output w.r.t. the tape's leaves.

    Leaves that do not influence the output receive zero gradients.  The
    tape is left untouched, so calling backward twice gives identical
    results.
    """
    _check_tensor(output, "output")
    if output.shape != (1, 1):
        raise ContractError(
            f"backward requires a 1x1 output, got shape {output.shape}"
        )
    grads: dict[Tensor, np.ndarray] = {output: np.ones((1, 1))}
    # Recording order puts parents before children, so a reverse sweep sees
    # every node after all of its consumers.
    for node in reversed(output.tape._nodes[: output._index + 1]):
        g = grads.get(node)
        if g is None or node._vjp is None:
            continue
        for parent, contrib in zip(node.parents, node._vjp(g)):
            acc = grads.get(parent)
            grads[parent] = contrib if acc is None else acc + contrib
    result = {}
    for leaf in output.tape._nodes:
        if leaf.is_leaf() and leaf.requires_grad:
            g = grads.get(leaf)
            # Copy so callers may mutate their gradients without aliasing
            # another leaf's array (identity vjps pass g through by reference).
            result[leaf] = np.zeros(leaf.shape) if g is None else np.array(g)
    return GradientSet(result)
