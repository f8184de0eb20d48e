"""Build the optional Cython kernels.

The package works without them: ``svcorrect.kernels`` falls back to a numpy
implementation when the extension is absent.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SVCORRECT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "svcorrect._ckernels",
                    ["src/svcorrect/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no -ffast-math: accumulated costs must match the
                    # fallback bit for bit
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
