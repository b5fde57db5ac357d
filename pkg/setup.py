"""Build script for the compiled smoothing kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the extension accelerates the local polynomial
smoother that dominates semiparametric fits.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fglm._locpoly_fast",
                sources=["src/fglm/_locpoly_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
