import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled CSR kernels; the package falls back to numpy implementations when
# the extension is unavailable (see abkd._kernels).
extensions = [
    Extension(
        "abkd._kernels._csr_cy",
        ["src/abkd/_kernels/_csr_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
