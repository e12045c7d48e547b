import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is None or not os.path.exists("src/resque/_kernels/_fastpath.pyx"):
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "resque._kernels._fastpath",
                ["src/resque/_kernels/_fastpath.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
