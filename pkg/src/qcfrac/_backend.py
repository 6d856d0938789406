"""Kernel selection: compiled extension when available, pure Python otherwise.

Set QCFRAC_PURE_PYTHON=1 to force the fallback (the benchmark and the
equivalence tests use this).
"""

import os

_REQUIRED = ("qpoch_finite", "qpoch_inf", "series_sum")

if os.environ.get("QCFRAC_PURE_PYTHON"):
    from . import _kernels_py as kernels

    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        if not all(hasattr(kernels, name) for name in _REQUIRED):
            raise ImportError("compiled kernel is incomplete")
        KERNEL_BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as kernels

        KERNEL_BACKEND = "python"

__all__ = ["kernels", "KERNEL_BACKEND"]
