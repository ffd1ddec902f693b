"""Special-function kernels with a compiled core and a numpy fallback.

The compiled extension (Cython) is preferred when importable; otherwise the
pure numpy implementations are used.  Both expose the same three functions
with identical semantics: ``lgamma``, ``digamma``, ``trigamma``, each taking
an array-like of positive floats and returning a float64 ndarray of the same
shape.

The environment variable ``GEL_KERNELS`` overrides the choice:

* ``auto`` (default): compiled if available, else numpy.
* ``cython``: require the compiled backend; raise if missing.
* ``python``: force the numpy fallback.
"""

import os

from . import pykernels

_choice = os.environ.get("GEL_KERNELS", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ImportError(
        f"GEL_KERNELS must be 'auto', 'cython' or 'python', got {_choice!r}"
    )

if _choice == "python":
    _impl = pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "GEL_KERNELS=cython but the compiled kernel extension is not "
                "available; reinstall the package with a C compiler present"
            )
        _impl = pykernels
        BACKEND = "python"

lgamma = _impl.lgamma
digamma = _impl.digamma
trigamma = _impl.trigamma

__all__ = ["lgamma", "digamma", "trigamma", "BACKEND", "pykernels"]
