"""Build script: compiles the optional simplex pivot kernel.

The package works without the extension (a pure NumPy kernel is selected at
import time), so any failure here degrades to a source-only install.
Set FMKT_NO_EXT=1 to skip the compilation attempt entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FMKT_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("fmkt.lp._pivot_cy", ["src/fmkt/lp/_pivot_cy.pyx"])],
            language_level="3",
        )
    except Exception as exc:  # pragma: no cover - depends on build host
        print(f"fmkt: building without compiled kernel ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
