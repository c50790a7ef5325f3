import numpy as np
from Cython.Build import cythonize
from setuptools import setup
from setuptools.extension import Extension

# The compiled kernels are optional: if the build fails (no compiler, no
# Cython), the package falls back to the numpy implementations at import.
extensions = [
    Extension(
        "coreselect._kernels._core",
        ["src/coreselect/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    ),
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}),
)
