"""Kernel backend selection.

SPEEDFLOW_BACKEND=numpy forces the pure-numpy kernels,
SPEEDFLOW_BACKEND=numba requires the compiled ones, and the default
("auto") takes numba when it imports cleanly. The choice is made once at
import time; ``kernels`` is the module the rest of the package calls into.
"""

import os


def _load(choice):
    if choice == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    if choice == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if choice == "auto":
        try:
            from . import _kernels_numba

            return _kernels_numba
        except ImportError:
            from . import _kernels_numpy

            return _kernels_numpy
    raise ValueError(
        f"SPEEDFLOW_BACKEND must be 'numba', 'numpy' or 'auto', got {choice!r}"
    )


kernels = _load(os.environ.get("SPEEDFLOW_BACKEND", "auto").strip().lower() or "auto")


def active_backend():
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return kernels.NAME
