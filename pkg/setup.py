from setuptools import setup, Extension
from Cython.Build import cythonize

ext_modules = cythonize(
    [Extension("fdext._kernels", ["src/fdext/_kernels.pyx"])],
    compiler_directives={
        "language_level": "3",
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
    },
)

setup(ext_modules=ext_modules)
