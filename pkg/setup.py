from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "auditem._hashcore",
                sources=["src/auditem/_hashcore.pyx"],
                libraries=["crypto"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # The pure-Python fallback is selected at import time when the
    # extension is missing, so a Cython-less install still works.
    ext_modules = []

setup(ext_modules=ext_modules)
