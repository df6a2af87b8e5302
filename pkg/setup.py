"""Build script for the optional compiled sampling core.

The package works without the extension (a pure-Python fallback is selected
at import time); building it makes batch Monte Carlo linking ~100x faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hitlace.kernels._core",
                ["src/hitlace/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps float arithmetic bit-identical to
                # the pure-Python fallback (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
