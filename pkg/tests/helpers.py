"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from gel import autodiff as ad

FD_STEP = 1e-5
FD_RTOL = 1e-4
FD_ATOL = 1e-7


def numerical_gradient(f, arrays, index, step=FD_STEP):
    """Central finite differences of scalar f(arrays) w.r.t. arrays[index]."""
    grad = np.zeros_like(arrays[index], dtype=np.float64)
    it = np.nditer(arrays[index], flags=["multi_index"])
    for _ in it:
        pos = it.multi_index
        plus = [a.copy() for a in arrays]
        minus = [a.copy() for a in arrays]
        plus[index][pos] += step
        minus[index][pos] -= step
        grad[pos] = (f(plus) - f(minus)) / (2.0 * step)
    return grad


def gradcheck(build, arrays, rtol=FD_RTOL, atol=FD_ATOL, step=FD_STEP):
    """Assert tape gradients match central finite differences.

    ``build(tape, leaves) -> scalar Tensor`` must be a pure function of
    its leaf tensors so it can be re-evaluated at shifted inputs.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    tape = ad.Tape()
    leaves = [tape.leaf(a) for a in arrays]
    grads = ad.backward(build(tape, leaves))

    def evaluate(shifted):
        t = ad.Tape()
        return float(build(t, [t.leaf(a) for a in shifted]).value[0, 0])

    for index, leaf in enumerate(leaves):
        numeric = numerical_gradient(evaluate, arrays, index, step)
        analytic = grads[leaf]
        scale = np.maximum(np.abs(numeric), np.abs(analytic))
        err = np.abs(analytic - numeric)
        bad = err > atol + rtol * scale
        assert not bad.any(), (
            f"gradient mismatch on input {index} at {np.argwhere(bad)[0]}: "
            f"analytic {analytic[bad][0]!r} vs numeric {numeric[bad][0]!r}"
        )
