"""Build script: compiles the optional Cython speedup kernels.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time); the build therefore tolerates a
missing or failing C toolchain.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("AFFPL_NO_EXT", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "affpl._speedups",
                    ["src/affpl/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except Exception as exc:  # pragma: no cover - toolchain-dependent
        print(f"affpl: skipping Cython extension build ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
