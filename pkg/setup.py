"""Build script: compiles the optional kernel extension.

The package works without the extension; gel._kernels falls back to the
vectorized numpy implementations when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("gel._kernels._ckernels", ["src/gel/_kernels/_ckernels.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
