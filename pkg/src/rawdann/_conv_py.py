"""Pure numpy conv1d kernels (fallback when the compiled extension is absent)."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _columns(x, k, stride):
    # [B, C_in, T', k] view; no copy
    return sliding_window_view(x, k, axis=2)[:, :, ::stride, :]


def conv1d_forward(x, w, b, stride):
    k = w.shape[2]
    cols = _columns(x, k, stride)
    out = np.tensordot(cols, w, axes=([1, 3], [1, 2]))  # [B, T', C_out]
    out = out.transpose(0, 2, 1) + b[None, :, None]
    return np.ascontiguousarray(out)


def conv1d_backward(x, w, grad_out, stride):
    """Return ``(grad_x, grad_w, grad_b)``."""
    k = w.shape[2]
    t_out = grad_out.shape[2]
    cols = _columns(x, k, stride)
    grad_w = np.tensordot(grad_out, cols, axes=([0, 2], [0, 2]))
    grad_b = grad_out.sum(axis=(0, 2))
    g = np.tensordot(grad_out, w, axes=([1], [0]))  # [B, T', C_in, k]
    grad_x = np.zeros_like(x)
    span = stride * (t_out - 1) + 1
    for j in range(k):
        grad_x[:, :, j:j + span:stride] += g[:, :, :, j].transpose(0, 2, 1)
    return grad_x, np.ascontiguousarray(grad_w), grad_b
