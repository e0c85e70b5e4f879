import os

import numpy as np
from setuptools import Extension, setup

# HBGFDI_NO_EXT=1 skips the compiled kernels; the package then runs on the
# pure-Python fallback.
ext_modules = []
if not os.environ.get("HBGFDI_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "hbgfdi.kernels._tanks_cy",
                    ["src/hbgfdi/kernels/_tanks_cy.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
