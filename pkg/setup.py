"""Build script. The compiled kernels are optional: when Cython or a C
compiler is missing the package installs pure-Python and selects the
numpy backend at import time."""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ievm.backends.cy_kernels",
                ["src/ievm/backends/cy_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"compiled kernels skipped ({exc}); installing pure-Python fallback")

setup(ext_modules=ext_modules)
