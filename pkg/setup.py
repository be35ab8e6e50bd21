import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the numpy fallback kernels still work
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "firmsim._ckernels",
                ["src/firmsim/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
