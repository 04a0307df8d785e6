import os

from setuptools import setup

ext_modules = []
if os.environ.get("COMMEXT_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("commext._kernels", ["src/commext/_kernels.pyx"], include_dirs=[numpy.get_include()])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
