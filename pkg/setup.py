"""Builds the optional compiled kernel; the package falls back to pure Python without it."""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("RAAS_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "raas._ckernels",
                ["src/raas/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # results must be bit-identical to the Python twin
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
