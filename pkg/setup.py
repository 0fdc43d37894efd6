"""Build script for the compiled kernel extension.

The package works without the extension (a vectorized numpy fallback is
selected at import time), so a missing compiler only costs speed.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernels if possible, warn and continue if not."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler / no Cython
            warnings.warn(f"skipping compiled kernels ({exc}); numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); numpy fallback will be used")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [
        Extension(
            "perturbench._kernels_cy",
            ["src/perturbench/_kernels_cy.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
    ]
    return cythonize(
        exts,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "language_level": "3",
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
