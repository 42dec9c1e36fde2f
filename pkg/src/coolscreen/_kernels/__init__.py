"""Hot-loop kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback in :mod:`._pyimpl` is selected.  Setting ``COOLSCREEN_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pyimpl

BACKEND = "python"

if os.environ.get("COOLSCREEN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pyimpl
else:
    _impl = _pyimpl

longest_path = _impl.longest_path
bvn_rect = _impl.bvn_rect
edge_message_sum = _impl.edge_message_sum

__all__ = ["BACKEND", "longest_path", "bvn_rect", "edge_message_sum"]
