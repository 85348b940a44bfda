"""Selects the kernel implementation at import time.

The compiled extension ``bemlocal._kernels`` is used when it imports;
otherwise the NumPy module ``bemlocal._kernels_py``. Setting the
environment variable ``BEMLOCAL_BACKEND=python`` forces the fallback.
:func:`use` switches at runtime (benchmarks and cross-checks).
"""

from __future__ import annotations

import importlib
import os

from . import _kernels_py

DLP_FAR_Q = _kernels_py.DLP_FAR_Q

_FUNCS = ("slp_matrix", "slp_quadform", "dlp_symm_apply", "dlp_hypsing_apply")


def _load(name: str):
    if name == "python":
        return _kernels_py
    if name == "compiled":
        return importlib.import_module("bemlocal._kernels")
    raise ValueError(f"unknown backend {name!r}")


def available() -> list[str]:
    names = ["python"]
    try:
        _load("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def use(name: str) -> None:
    """Route all kernel calls to ``name`` (``"compiled"`` or ``"python"``)."""
    global NAME
    impl = _load(name)
    for fn in _FUNCS:
        globals()[fn] = getattr(impl, fn)
    NAME = name


def set_threads(n: int) -> None:
    """Thread count for the compiled kernels (no effect on the fallback)."""
    try:
        mod = _load("compiled")
    except ImportError:
        return
    mod.set_num_threads(int(n))


NAME = "python"
_requested = os.environ.get("BEMLOCAL_BACKEND", "").strip().lower()
if _requested == "python":
    use("python")
else:
    try:
        use("compiled")
    except ImportError:
        if _requested == "compiled":
            raise
        use("python")
