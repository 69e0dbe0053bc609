"""Backend selection: compiled kernels when available, numpy otherwise.

The compiled extension ``statesep._kernel`` is optional; builds without a
C compiler fall back to the numpy reference in ``statesep._kernel_py``.
Set ``STATESEP_BACKEND=python`` or ``=compiled`` to force a choice
(forcing ``compiled`` raises if the extension is missing).
"""
from __future__ import annotations

import os

from . import _kernel_py

__all__ = ["get_backend", "backend_name", "train_chunk", "eval_chunk",
           "fisher_chunk"]

_FORCED = os.environ.get("STATESEP_BACKEND", "").strip().lower()

_impl = None
if _FORCED in ("", "compiled"):
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "compiled":
            raise ImportError(
                "STATESEP_BACKEND=compiled but the statesep._kernel "
                "extension is not built")
        _impl = None
elif _FORCED != "python":
    raise ValueError(f"STATESEP_BACKEND must be 'python' or 'compiled', "
                     f"got {_FORCED!r}")
if _impl is None:
    _impl = _kernel_py


def get_backend(name: str | None = None):
    """Kernel module by name: None for the active default, 'python' or
    'compiled' to pick explicitly."""
    if name in (None, "", backend_name()):
        return _impl
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel
        return _kernel
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    return _impl.BACKEND


train_chunk = _impl.train_chunk
eval_chunk = _impl.eval_chunk
fisher_chunk = _impl.fisher_chunk
