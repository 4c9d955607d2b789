"""Builds the optional compiled kernel core.

The package works without it: ``binpipe.kernels`` falls back to the numpy
implementation when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("BINPIPE_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext = Extension(
            "binpipe.kernels._native",
            ["src/binpipe/kernels/_native.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # contraction into FMA would break bit-equality with the numpy path
            extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
        )
        ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
