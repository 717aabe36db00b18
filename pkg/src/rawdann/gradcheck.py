"""Central finite-difference checks for every layer and the adversarial gradient.

The error measure for a gradient tensor is
``||analytic - numeric|| / max(||analytic||, ||numeric||)`` (L2 norms),
which is 0 for two exactly-zero tensors.
"""
import numpy as np

from rawdann.layers import (
    AvgPool1D, Conv1D, Dense, GradientReversal, ReLU, softmax_cross_entropy,
)
from rawdann.model import ArchConfig, DannModel
from rawdann.optim import compute_gradients

EPS = 1e-6
TOLERANCE = 1e-4

TINY_ARCH = ArchConfig(frame_length=64, convs=((8, 4, 4), (3, 5, 1)), pool=2,
                       n_classes=3, label_depth=2, label_width=6,
                       domain_depth=2, domain_width=6)


def rel_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def numeric_grad(f, x, eps=EPS):
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + eps
        up = f()
        x[i] = orig - eps
        down = f()
        x[i] = orig
        grad[i] = (up - down) / (2 * eps)
    return grad


def check_layer(layer, x, rng, eps=EPS):
    """Worst error over the input and every parameter of ``layer``.

    Uses the scalar probe ``sum(forward(x) * r)`` with a fixed random ``r``.
    """
    x = np.array(x, dtype=np.float64)
    out = layer.forward(x)
    r = rng.standard_normal(out.shape)
    grad_in = layer.backward(r)
    analytic = {"input": grad_in}
    analytic.update({k: v.copy() for k, v in layer.grads.items()})

    def probe():
        return float(np.sum(layer.forward(x) * r))

    errors = {"input": rel_error(grad_in, numeric_grad(probe, x, eps))}
    for name, p in layer.params.items():
        errors[name] = rel_error(analytic[name], numeric_grad(probe, p, eps))
    return max(errors.values())


def _relu_input(rng, shape):
    # keep clear of the kink at 0
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < 1e-3, 0.5, x)


def check_softmax_ce(rng, eps=EPS):
    logits = rng.standard_normal((5, 4))
    labels = rng.integers(0, 4, 5)
    _, grad = softmax_cross_entropy(logits, labels)
    numeric = numeric_grad(lambda: softmax_cross_entropy(logits, labels)[0], logits, eps)
    return rel_error(grad, numeric)


def check_grl(rng):
    """GRL has no FD-friendly scalar of its own; compare backward with -lam * upstream."""
    worst = 0.0
    for lam in (0.0, 0.5, 1.0):
        layer = GradientReversal(lam)
        x = rng.standard_normal((3, 4))
        if not np.array_equal(layer.forward(x), x):
            return float("inf")
        g = rng.standard_normal((3, 4))
        worst = max(worst, rel_error(layer.backward(g), -lam * g))
        # the probe sum(grl(x) * r) has derivative r; the layer reports -lam*r
        if lam == 1.0:
            numeric = numeric_grad(lambda: float(np.sum(layer.forward(x) * g)), x, EPS)
            worst = max(worst, rel_error(layer.backward(g), -numeric))
    return worst


def _batch(rng, arch, n=6):
    from rawdann.data import ABSENT, Batch

    frames = rng.standard_normal((n, 1, arch.frame_length))
    domains = np.array([0, 1] * (n // 2), dtype=np.int64)
    classes = np.where(domains == 0, rng.integers(0, arch.n_classes, n), ABSENT)
    return Batch(frames, classes, domains)


def check_composite(rng, lam=0.7, eps=EPS):
    """Feature-extractor gradient of ``L_y - lam * L_d`` plus both head gradients.

    Returns the worst error across feature, label-head and domain-head
    parameters; the domain head is checked against ``L_d`` itself.
    """
    model = DannModel(TINY_ARCH, seed=int(rng.integers(1 << 31)))
    batch = _batch(rng, TINY_ARCH)
    targets = rng.integers(0, 2, len(batch))
    compute_gradients(model, batch, lam, targets)
    analytic = {name: layer.grads[key].copy() for name, layer, key in model.named_params()}
    src = batch.domain_labels == 0

    def losses():
        f = model.extract_features(batch.frames)
        ly = softmax_cross_entropy(model.label_head.forward(f[src]), batch.class_labels[src])[0]
        ld = softmax_cross_entropy(model.domain_head.forward(f), targets)[0]
        return ly, ld

    def objective():
        ly, ld = losses()
        return ly - lam * ld

    worst = 0.0
    for name, layer, key in model.named_params():
        f = (lambda: losses()[1]) if name.startswith("domain.") else objective
        worst = max(worst, rel_error(analytic[name], numeric_grad(f, layer.params[key], eps)))
    return worst


def layer_cases(rng, backend=None):
    return {
        "conv1d": lambda: check_layer(Conv1D(3, 4, 5, 2, rng, backend=backend),
                                      rng.standard_normal((2, 3, 17)), rng),
        "avgpool1d": lambda: check_layer(AvgPool1D(2), rng.standard_normal((2, 3, 9)), rng),
        "relu": lambda: check_layer(ReLU(), _relu_input(rng, (3, 7)), rng),
        "dense": lambda: check_layer(Dense(5, 4, rng), rng.standard_normal((3, 5)), rng),
        "softmax_ce": lambda: check_softmax_ce(rng),
        "grl": lambda: check_grl(rng),
        "dann_composite": lambda: check_composite(rng),
    }


def run(seed=0, n_seeds=5, backend=None):
    """Worst relative error per check over ``n_seeds`` consecutive seeds."""
    worst = {}
    for s in range(seed, seed + n_seeds):
        rng = np.random.default_rng(s)
        for name, case in layer_cases(rng, backend).items():
            worst[name] = max(worst.get(name, 0.0), case())
    return worst
