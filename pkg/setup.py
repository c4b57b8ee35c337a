from setuptools import setup, Extension
from Cython.Build import cythonize
import numpy as np

ext = Extension(
    "pulsenet.kernels._conv_cy",
    ["src/pulsenet/kernels/_conv_cy.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-march=native", "-ffast-math"],
)

setup(ext_modules=cythonize(ext, language_level=3))
