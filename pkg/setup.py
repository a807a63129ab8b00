"""Build hook: compile the optional C kernel core when a toolchain is present.

The package works without it (pure-Python fallbacks in _kernels_py), just
slower on checksum-heavy paths.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PREFIXKV_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/prefixkv/_ckernels.pyx"],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
