from setuptools import Extension, setup

# The compiled kernels are optional: policymc.kernels falls back to the pure
# Python implementation when the extension is missing.  -ffp-contract=off
# keeps the C code bitwise-identical to the fallback (no fused multiply-add).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "policymc._ckernels",
                ["src/policymc/_ckernels.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
