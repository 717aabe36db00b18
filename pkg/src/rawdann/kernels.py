"""Selects the conv1d kernel backend at import time.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``RAWDANN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from rawdann import _conv_py

_BACKENDS = {"python": _conv_py}

try:
    from rawdann import _conv_ext
except ImportError:  # extension not built
    _conv_ext = None
else:
    _BACKENDS["compiled"] = _conv_ext

if _conv_ext is not None and not os.environ.get("RAWDANN_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"conv backend {name!r} unavailable; have {available_backends()}"
        ) from None


def conv1d_forward(x, w, b, stride):
    return _active.conv1d_forward(x, w, b, stride)


def conv1d_backward(x, w, grad_out, stride):
    return _active.conv1d_backward(x, w, grad_out, stride)
