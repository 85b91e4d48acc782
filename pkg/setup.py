"""Build script: compiles the optional LSTM sequence kernel.

The compiled extension is an accelerator only. If Cython or a C toolchain
is unavailable the build still succeeds and the package falls back to the
pure-NumPy kernel at import time.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Never fail the install over the optional accelerator."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            print(f"warning: skipping compiled kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: skipping {ext.name} ({exc})")


def _extensions():
    if os.environ.get("DRUGENC_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "drugenc.model.kernels._seq_lstm",
        ["src/drugenc/model/kernels/_seq_lstm.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
