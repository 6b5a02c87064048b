"""Selects the compiled kernels when available, else the NumPy fallback."""
import os

from . import _pykernels

if os.environ.get("OBVERSIM_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
density_values = _impl.density_values
omega_values = _impl.omega_values
rejection_accept = _impl.rejection_accept


def backends():
    """All importable kernel modules, keyed by name."""
    found = {"numpy": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
