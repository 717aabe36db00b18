"""Dense float64 tensor helpers.

Tensors are plain C-contiguous ``numpy.ndarray`` objects of dtype float64.
These helpers add the shape checks and deterministic initialisation the
rest of the package relies on; they never modify their inputs.
"""
import math

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when tensor shapes are incompatible."""


def as_tensor(x):
    return np.ascontiguousarray(x, dtype=DTYPE)


def zeros(shape):
    return np.zeros(shape, dtype=DTYPE)


def matmul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul: cannot multiply {tuple(a.shape)} by {tuple(b.shape)}"
        )
    return a @ b


_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(a, b, op):
    """Pointwise ``add``/``sub``/``mul`` of two identically shaped tensors."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(
            f"{op}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}"
        )
    return fn(a, b)


def glorot_bound(fan_in, fan_out):
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fans must be positive, got fan_in={fan_in}, fan_out={fan_out}")
    return math.sqrt(6.0 / (fan_in + fan_out))


def glorot_init(fan_in, fan_out, shape, rng):
    """Uniform Glorot initialisation on [-L, L], L = sqrt(6 / (fan_in + fan_out)).

    ``rng`` is a ``numpy.random.Generator``; the result depends only on its state.
    """
    bound = glorot_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(DTYPE)
