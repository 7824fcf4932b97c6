"""Build script for the compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the Monte Carlo inner loops faster.
Set MILD_GIRSANOV_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MILD_GIRSANOV_NO_EXT"):
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "mild_girsanov._kernels._core",
        ["src/mild_girsanov/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FP contraction: keeps the C loops reproducible op-for-op
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
