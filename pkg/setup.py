import os

from setuptools import Extension, setup

# The compiled kernel is an optional accelerator: if Cython or a C compiler
# is unavailable the package falls back to the numpy implementation at
# import time. Set STATESEP_PURE_PYTHON=1 to skip the extension entirely.
#
# -march=native plus -fassociative-math let gcc vectorize the reduction
# loops for the build host. Reassociation changes the (fixed) summation
# order, so compiled results differ from the numpy backend in the last
# bits, but every run of a given build is bit-identical: the kernels are
# single-threaded and branch only on values. The wilder -ffast-math
# subsets (finite-math-only, reciprocal-math) stay off.
ext_modules = []
if not os.environ.get("STATESEP_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "statesep._kernel",
                    ["src/statesep/_kernel.pyx"],
                    extra_compile_args=["-O3", "-march=native",
                                        "-fno-math-errno",
                                        "-fassociative-math",
                                        "-fno-trapping-math",
                                        "-fno-signed-zeros"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
