"""Build script for the optional compiled kernel core.

The package works without the extension (a numpy fallback is selected at
import time); set POINTASSIST_PURE=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("POINTASSIST_PURE", "0") != "1":
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pointassist.kernels._native",
                ["src/pointassist/kernels/_native.pyx"],
                extra_compile_args=["-O3", "-fopenmp", "-ffp-contract=off"],
                extra_link_args=["-fopenmp"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
