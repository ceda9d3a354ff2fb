"""Graph kernels with backend selection at import time.

The compiled Cython extension is preferred; when it is unavailable the
pure-numpy fallback takes over with identical semantics.  ``BACKEND``
reports which one is active.
"""

from . import _graphops_py as fallback

try:
    from . import _graphops as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = fallback
    BACKEND = "python"

edge_aggregate_fwd = _impl.edge_aggregate_fwd
edge_aggregate_bwd = _impl.edge_aggregate_bwd
propagate_fwd = _impl.propagate_fwd
propagate_bwd = _impl.propagate_bwd

__all__ = [
    "BACKEND",
    "fallback",
    "edge_aggregate_fwd",
    "edge_aggregate_bwd",
    "propagate_fwd",
    "propagate_bwd",
]
