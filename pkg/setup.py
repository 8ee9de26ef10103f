import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "bearing_flows.engine._core_cy",
        ["src/bearing_flows/engine/_core_cy.pyx"],
        include_dirs=[numpy.get_include()],
        # no fp contraction: the compiled kernel must agree bitwise with
        # the numpy fallback, and fused multiply-adds would break that
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
