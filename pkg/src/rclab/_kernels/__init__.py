"""Backend selection for the integration kernels.

The compiled extension (``_native``, Cython) is used when it imported
cleanly; otherwise the numpy reference (``pyref``) takes over.  Setting the
environment variable ``RCLAB_PURE_PYTHON=1`` forces the reference backend,
which is handy for debugging and for the backend benchmark.
"""

import os

from . import pyref


def _select():
    if os.environ.get("RCLAB_PURE_PYTHON", "") not in ("", "0"):
        return pyref, "python"
    try:
        from . import _native
    except ImportError:
        return pyref, "python"
    return _native, "native"


_impl, BACKEND = _select()

csr_matvec = _impl.csr_matvec
open_loop_rk4 = _impl.open_loop_rk4
closed_loop_rk4 = _impl.closed_loop_rk4


def available_backends():
    names = ["python"]
    try:
        from . import _native  # noqa: F401
        names.insert(0, "native")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the kernel module for ``name`` ("native" or "python")."""
    if name == "python":
        return pyref
    if name == "native":
        from . import _native
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")
