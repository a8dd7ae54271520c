import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-python fallback backend still works without the extension.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "amc._kernels._native",
                ["src/amc/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off: the float32 kernels pin their rounding
                # sequence; FMA contraction would break bit-parity with the
                # numpy fallback.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
