import os

import numpy
from setuptools import Extension, setup

ext = []
if os.environ.get("NANOSNN_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext = cythonize(
            [Extension("nanosnn._ckernel", ["src/nanosnn/_ckernel.pyx"],
                       include_dirs=[numpy.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext)
