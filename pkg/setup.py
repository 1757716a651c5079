from setuptools import setup, Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "groundchat.maskops._kernels",
                ["src/groundchat/maskops/_kernels.pyx"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: the package still works on the pure-Python fallback.
    ext_modules = []

setup(ext_modules=ext_modules)
