import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are optional: if the build fails the package falls
# back to the pure-Python implementation in isrubench._kernels_py.
extensions = [
    Extension(
        "isrubench._kernels",
        ["src/isrubench/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
