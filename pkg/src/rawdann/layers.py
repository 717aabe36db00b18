"""Layer primitives with explicit forward/backward passes.

Each layer keeps its parameters in ``params``, the gradients of the last
backward call in ``grads`` (same keys and shapes), and whatever it needs
from the last forward call in a private cache.
"""
import numpy as np

from rawdann import kernels
from rawdann.tensor import DimensionError, as_tensor, glorot_init, zeros


class StateError(RuntimeError):
    """Backward called without a preceding forward."""


class Layer:
    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def zero_grad(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)


class Conv1D(Layer):
    """Valid 1-d convolution over ``[batch, channels, time]`` input.

    ``out[b, c, m] = sum_{c', j} w[c, c', j] * x[b, c', m*stride + j] + bias[c]``.
    No activation is applied.
    """

    def __init__(self, in_channels, out_channels, width, stride=1, rng=None, backend=None):
        super().__init__()
        if width < 1 or stride < 1:
            raise ValueError(f"width and stride must be >= 1, got {width}, {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.width = width
        self.stride = stride
        self.kernels = kernels if backend is None else kernels.get_backend(backend)
        rng = np.random.default_rng() if rng is None else rng
        self.params["w"] = glorot_init(
            in_channels * width, out_channels * width,
            (out_channels, in_channels, width), rng,
        )
        self.params["b"] = zeros(out_channels)
        self.zero_grad()

    def output_length(self, t):
        if t < self.width:
            raise DimensionError(
                f"conv1d input length {t} shorter than filter width {self.width}"
            )
        return (t - self.width) // self.stride + 1

    def forward(self, x):
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise DimensionError(
                f"conv1d expects [B, {self.in_channels}, T], got {tuple(x.shape)}"
            )
        self.output_length(x.shape[2])
        self._cache = x
        return self.kernels.conv1d_forward(x, self.params["w"], self.params["b"], self.stride)

    def backward(self, grad_out):
        x = self._cached()
        grad_out = as_tensor(grad_out)
        expected = (x.shape[0], self.out_channels, self.output_length(x.shape[2]))
        if grad_out.shape != expected:
            raise DimensionError(
                f"conv1d grad shape {tuple(grad_out.shape)} != output shape {expected}"
            )
        gx, gw, gb = self.kernels.conv1d_backward(x, self.params["w"], grad_out, self.stride)
        self.grads["w"] = gw
        self.grads["b"] = gb
        return gx


class AvgPool1D(Layer):
    """Non-overlapping mean pooling along time; a trailing remainder is dropped."""

    def __init__(self, pool):
        super().__init__()
        if pool < 1:
            raise ValueError(f"pool size must be >= 1, got {pool}")
        self.pool = pool

    def output_length(self, t):
        if self.pool > t:
            raise DimensionError(f"pool size {self.pool} exceeds input length {t}")
        return t // self.pool

    def forward(self, x):
        x = as_tensor(x)
        b, c, t = x.shape
        t_out = self.output_length(t)
        self._cache = x.shape
        used = x[:, :, : t_out * self.pool]
        return used.reshape(b, c, t_out, self.pool).mean(axis=3)

    def backward(self, grad_out):
        shape = self._cached()
        grad_in = zeros(shape)
        t_out = grad_out.shape[2]
        spread = np.repeat(as_tensor(grad_out) / self.pool, self.pool, axis=2)
        grad_in[:, :, : t_out * self.pool] = spread
        return grad_in


class ReLU(Layer):
    def forward(self, x):
        x = as_tensor(x)
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, grad_out):
        mask = self._cached()
        return np.where(mask, as_tensor(grad_out), 0.0)


class Flatten(Layer):
    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._cached())


class Dense(Layer):
    """Affine map ``x @ W + b`` on ``[batch, features]`` input."""

    def __init__(self, d_in, d_out, rng=None):
        super().__init__()
        rng = np.random.default_rng() if rng is None else rng
        self.params["w"] = glorot_init(d_in, d_out, (d_in, d_out), rng)
        self.params["b"] = zeros(d_out)
        self.zero_grad()

    def forward(self, x):
        x = as_tensor(x)
        d_in = self.params["w"].shape[0]
        if x.ndim != 2 or x.shape[1] != d_in:
            raise DimensionError(f"dense expects [B, {d_in}], got {tuple(x.shape)}")
        self._cache = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, grad_out):
        x = self._cached()
        self.grads["w"] = x.T @ grad_out
        self.grads["b"] = grad_out.sum(axis=0)
        return grad_out @ self.params["w"].T


class GradientReversal(Layer):
    """Identity on the way forward; multiplies gradients by ``-lam`` on the way back."""

    def __init__(self, lam=0.0):
        super().__init__()
        self.lam = lam

    @property
    def lam(self):
        return self._lam

    @lam.setter
    def lam(self, value):
        if value < 0:
            raise ValueError(f"GRL coefficient must be >= 0, got {value}")
        self._lam = float(value)

    def forward(self, x):
        self._cache = True
        return x

    def backward(self, grad_out):
        self._cached()
        return (-self._lam) * as_tensor(grad_out)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Batch-mean cross-entropy and its gradient w.r.t. ``logits``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match batch {n}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got {labels.min()}..{labels.max()}")
    z = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_z - z[rows, labels]))
    grad = np.exp(z - log_z[:, None])
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad


class Sequential(Layer):
    """Chain of layers; parameters are exposed as ``"<index>.<name>"``."""

    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{i}.{name}", layer, name

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()
