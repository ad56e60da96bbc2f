import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off: the pure-Python backend must reproduce the compiled
# backend bitwise on identical seeds, so FMA contraction is disabled.
extensions = [
    Extension(
        "spherewalk._native.core",
        ["src/spherewalk/_native/core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
