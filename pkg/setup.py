import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def extensions():
    # LIDARSEQ_NO_EXT=1 skips the compiled core; the package then runs on
    # the numpy fallback selected at import time.
    if cythonize is None or os.environ.get("LIDARSEQ_NO_EXT"):
        return []
    ext = Extension(
        "lidarseq._kernels._core",
        ["src/lidarseq/_kernels/_core.pyx"],
        language="c++",
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-std=c++11"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
