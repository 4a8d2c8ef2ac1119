"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); compiling it just makes the simulation inner loops fast.
Build in place with:

    python setup.py build_ext --inplace
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "se3mpc._kernels._core",
                sources=["src/se3mpc/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
