"""Y-shaped domain-adversarial network.

A shared convolutional feature extractor feeds a label head directly and a
domain head through a gradient reversal layer. Only the feature extractor
and label head take part in prediction.
"""
from dataclasses import dataclass

import numpy as np

from rawdann.formats import FormatError, load_checkpoint, save_checkpoint
from rawdann.layers import (
    AvgPool1D, Conv1D, Dense, Flatten, GradientReversal, ReLU, Sequential,
)
from rawdann.tensor import DimensionError, as_tensor


class ConfigError(ValueError):
    """Architecture and data disagree."""


@dataclass(frozen=True)
class ArchConfig:
    frame_length: int = 560
    convs: tuple = ((32, 32, 16), (5, 32, 1))  # (filter width, feature maps, stride)
    pool: int = 2
    n_classes: int = 4
    label_depth: int = 3
    label_width: int = 64
    domain_depth: int = 3
    domain_width: int = 64

    def __post_init__(self):
        values = [self.frame_length, self.pool, self.n_classes, self.label_depth,
                  self.label_width, self.domain_depth, self.domain_width]
        values += [v for spec in self.convs for v in spec]
        if not self.convs or any(int(v) < 1 for v in values):
            raise ConfigError(f"all architecture dimensions must be positive: {self}")
        self.feature_shape()

    @classmethod
    def large(cls, n_classes=4, **overrides):
        """Raw-speech preset: 310 ms frames at 16 kHz, two conv stages, wide heads."""
        kw = dict(frame_length=4960, convs=((64, 256, 31), (15, 128, 1)), pool=2,
                  n_classes=n_classes, label_depth=4, label_width=1024,
                  domain_depth=4, domain_width=1024)
        kw.update(overrides)
        return cls(**kw)

    def feature_shape(self):
        """``(channels, length)`` of the final conv/pool/ReLU stage."""
        t = self.frame_length
        channels = 1
        for width, maps, stride in self.convs:
            if t < width:
                raise ConfigError(f"frame length {self.frame_length} too short for conv stack")
            t = (t - width) // stride + 1
            if t < self.pool:
                raise ConfigError(f"frame length {self.frame_length} too short for pooling")
            t //= self.pool
            channels = maps
        return channels, t

    def feature_dim(self):
        c, t = self.feature_shape()
        return c * t

    def to_vector(self):
        head = [self.frame_length, self.pool, self.n_classes, self.label_depth,
                self.label_width, self.domain_depth, self.domain_width, len(self.convs)]
        return np.asarray(head + [v for spec in self.convs for v in spec], dtype=np.float64)

    @classmethod
    def from_vector(cls, vec):
        v = [int(x) for x in vec]
        n_conv = v[7]
        convs = tuple(tuple(v[8 + 3 * i: 11 + 3 * i]) for i in range(n_conv))
        return cls(frame_length=v[0], convs=convs, pool=v[1], n_classes=v[2],
                   label_depth=v[3], label_width=v[4], domain_depth=v[5],
                   domain_width=v[6])


def _head(d_in, depth, width, d_out, rng):
    layers = []
    for _ in range(depth - 1):
        layers += [Dense(d_in, width, rng), ReLU()]
        d_in = width
    layers.append(Dense(d_in, d_out, rng))
    return Sequential(layers)


class DannModel:
    GROUPS = ("feature", "label", "domain")

    def __init__(self, arch, seed=0, backend=None):
        self.arch = arch
        rng = np.random.default_rng(seed)
        layers = []
        c_in = 1
        for width, maps, stride in arch.convs:
            layers += [Conv1D(c_in, maps, width, stride, rng, backend=backend),
                       AvgPool1D(arch.pool), ReLU()]
            c_in = maps
        layers.append(Flatten())
        self.feature_extractor = Sequential(layers)
        d = arch.feature_dim()
        self.label_head = _head(d, arch.label_depth, arch.label_width, arch.n_classes, rng)
        self.grl = GradientReversal(0.0)
        self.domain_head = _head(d, arch.domain_depth, arch.domain_width, 2, rng)

    @property
    def lam(self):
        return self.grl.lam

    @lam.setter
    def lam(self, value):
        self.grl.lam = value

    def _check_input(self, x):
        x = as_tensor(x)
        if x.ndim == 2:
            x = x[:, None, :]
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.arch.frame_length:
            raise DimensionError(
                f"expected input [B, 1, {self.arch.frame_length}], got {tuple(x.shape)}"
            )
        return x

    def extract_features(self, x):
        return self.feature_extractor.forward(self._check_input(x))

    def forward_label(self, x):
        return self.label_head.forward(self.extract_features(x))

    def forward_domain(self, x):
        return self.domain_head.forward(self.grl.forward(self.extract_features(x)))

    def predict(self, x):
        return np.argmax(self.forward_label(x), axis=1)

    def predict_domain(self, x):
        return np.argmax(self.forward_domain(x), axis=1)

    def group(self, name):
        return {"feature": self.feature_extractor, "label": self.label_head,
                "domain": self.domain_head}[name]

    def named_params(self, groups=GROUPS):
        """Yield ``(qualified name, layer, key)`` for every parameter."""
        for g in groups:
            for name, layer, key in self.group(g).named_params():
                yield f"{g}.{name}", layer, key

    def state_dict(self):
        return {name: layer.params[key].copy() for name, layer, key in self.named_params()}

    def load_state_dict(self, state):
        for name, layer, key in self.named_params():
            if name not in state:
                raise FormatError(f"checkpoint lacks tensor {name!r}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != layer.params[key].shape:
                raise ConfigError(
                    f"tensor {name!r} has shape {value.shape}, "
                    f"model expects {layer.params[key].shape}"
                )
            layer.params[key] = value.copy()


def save_model(path, model, extra=None):
    """Checkpoint = architecture vector, any ``extra`` tensors, then all parameters."""
    tensors = {"meta.arch": model.arch.to_vector()}
    tensors.update(extra or {})
    tensors.update(model.state_dict())
    save_checkpoint(path, tensors)


def load_model(path, backend=None):
    """Return ``(model, meta)`` where ``meta`` holds the non-parameter tensors."""
    tensors = load_checkpoint(path)
    if "meta.arch" not in tensors:
        raise FormatError(f"{path}: missing meta.arch")
    model = DannModel(ArchConfig.from_vector(tensors["meta.arch"]), seed=0, backend=backend)
    model.load_state_dict(tensors)
    meta = {k: v for k, v in tensors.items() if k.startswith("meta.")}
    return model, meta
