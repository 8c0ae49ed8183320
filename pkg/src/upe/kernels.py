"""Backend selection for the hot kernels.

The compiled ``_kernels`` extension is used when importable; set
``UPE_PURE_PYTHON=1`` to force the numpy fallback. ``BACKEND`` names the
active implementation.
"""
import os

from . import _kernels_py

if os.environ.get("UPE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

PROBIT = _kernels_py.PROBIT
LOGIT = _kernels_py.LOGIT
STATUS_CONVERGED = _kernels_py.STATUS_CONVERGED
STATUS_MAX_ITER = _kernels_py.STATUS_MAX_ITER
STATUS_DIVERGED = _kernels_py.STATUS_DIVERGED
STATUS_LINE_SEARCH = _kernels_py.STATUS_LINE_SEARCH
STATUS_SINGULAR = _kernels_py.STATUS_SINGULAR

link_arrays = _impl.link_arrays
gaussian_kde = _impl.gaussian_kde
fit_binary = _impl.fit_binary

__all__ = [
    "BACKEND",
    "PROBIT",
    "LOGIT",
    "link_arrays",
    "gaussian_kde",
    "fit_binary",
]
