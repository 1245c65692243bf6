import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mclab._core",
                ["src/mclab/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Source distributions without Cython fall back to the pure-Python kernels.
    extensions = []

setup(ext_modules=extensions)
