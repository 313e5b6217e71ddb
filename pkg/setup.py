"""Build script for the compiled simulation kernels.

The extension links against numpy's static npyrandom library so the kernels
can draw from the same bit streams as numpy Generator objects. If Cython or
the library is unavailable the package still installs; the simulators then
fall back to the pure-Python kernels at import time.
"""

import os

import numpy as np
from setuptools import Extension, setup


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    lib_dir = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext = Extension(
        "hiddensirs.simulate._kernels",
        ["src/hiddensirs/simulate/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[lib_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
