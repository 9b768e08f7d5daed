"""Build script for the optional compiled replay kernel.

The package is pure Python plus one Cython extension (adalloc._speedups)
that accelerates the per-request auction loop. The extension is optional:
if Cython or a C compiler is unavailable the install proceeds without it
and the package falls back to the pure-Python loop at import time.

-ffp-contract=off keeps the compiled arithmetic bit-identical to CPython
floats (no fused multiply-add), which the parity tests rely on.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "adalloc._speedups",
                ["src/adalloc/_speedups.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
