"""Builds the optional compiled kernels; the package works without them."""

import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None

openmp = [] if sys.platform == "darwin" or os.environ.get("BEMLOCAL_NO_OPENMP") else ["-fopenmp"]

ext_modules = []
if cythonize is not None and not os.environ.get("BEMLOCAL_PURE_PYTHON"):
    ext = Extension(
        "bemlocal._kernels",
        ["src/bemlocal/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + openmp,
        extra_link_args=openmp,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
