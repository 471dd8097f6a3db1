"""Kernel backend selection.

The compiled extension is used when present; the pure-Python fallback is
bitwise-equivalent, so everything above this module is backend-agnostic.
Set POLICYMC_PURE_KERNELS=1 to force the fallback.
"""

import os

if os.environ.get("POLICYMC_PURE_KERNELS") == "1":
    from . import _pykernels as _impl
    BACKEND = "pure"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:
        from . import _pykernels as _impl
        BACKEND = "pure"

vi_run = _impl.vi_run
dtmc_gs_run = _impl.dtmc_gs_run
q_values = _impl.q_values
