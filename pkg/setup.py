"""Build script for the optional compiled SGD kernel.

The package works without the extension (a NumPy fallback is selected at
import time); the Cython module only speeds up the sequential training loop.
If Cython or a C compiler is unavailable the build degrades to pure Python
instead of failing.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build extensions, but never fail the install over them."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc})")


ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rf_lab._sgd_cy",
                ["src/rf_lab/_sgd_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    print("warning: Cython/NumPy not available at build time; installing pure-Python only")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
