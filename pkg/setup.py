"""Build script for the compiled ragged-segment kernels.

The extension is optional: if Cython or a C compiler is unavailable the
install still succeeds and ``bdhh.kernels`` falls back to the numpy
implementation at import time.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Tolerate extension build failures; the package works without them."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            warnings.warn(f"compiled kernels skipped ({exc}); numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            warnings.warn(f"building {ext.name} failed ({exc}); numpy fallback will be used")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:  # pragma: no cover - depends on toolchain
        return []
    return cythonize(
        [
            Extension(
                "bdhh.kernels._ragged",
                ["src/bdhh/kernels/_ragged.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
