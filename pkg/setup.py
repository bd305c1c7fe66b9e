"""Build hook for the optional compiled split-search kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes boosted-tree fitting faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "paqol._splitcore",
                sources=["src/paqol/_splitcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
