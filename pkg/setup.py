"""Build script for the optional compiled kernels.

The package works without the extension (a numpy fallback is selected at
import time), but the compiled kernels make the bootstrap studies several
times faster on a single core.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "shiftboot._kernels",
        ["src/shiftboot/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
