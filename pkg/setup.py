"""Build script for the optional compiled scan kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes the selective-scan recurrence fast.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ssmfusion.kernels._scan_cy",
                ["src/ssmfusion/kernels/_scan_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # -ffp-contract=off keeps mul/add sequences bitwise identical
                # to the numpy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
