"""Convolution kernel backend selection.

The compiled Cython core is preferred; the pure-NumPy implementation is
the fallback when the extension is missing (e.g. a source checkout that
was never built). Set DESKRL_BACKEND=numpy or =cython to force one.
"""

import os

from . import conv_np
from .common import same_out, same_pad

__all__ = [
    "BACKEND",
    "conv2d_fwd",
    "conv2d_bwd_input",
    "conv2d_bwd_weights",
    "sq_sum",
    "rmsprop_update",
    "adam_update",
    "same_out",
    "same_pad",
    "backends",
]

_choice = os.environ.get("DESKRL_BACKEND", "").lower()

if _choice in ("numpy", "np"):
    _impl = conv_np
else:
    try:
        from . import _convcy as _impl
    except ImportError:
        if _choice:
            raise
        _impl = conv_np

BACKEND = _impl.NAME
conv2d_fwd = _impl.conv2d_fwd
conv2d_bwd_input = _impl.conv2d_bwd_input
conv2d_bwd_weights = _impl.conv2d_bwd_weights
sq_sum = _impl.sq_sum
rmsprop_update = _impl.rmsprop_update
adam_update = _impl.adam_update


def backends():
    """All importable backends, for the benchmark and equivalence tests."""
    out = {"numpy": conv_np}
    try:
        from . import _convcy

        out["cython"] = _convcy
    except ImportError:
        pass
    return out
