"""Schedules, momentum SGD and the adversarial training step."""
import math
from dataclasses import dataclass

import numpy as np

from rawdann.data import SOURCE
from rawdann.layers import softmax_cross_entropy
from rawdann.tensor import DimensionError


@dataclass
class TrainConfig:
    mu0: float = 0.01
    alpha: float = 10.0
    beta: float = 0.75
    gamma: float = 10.0
    momentum: float = 0.9
    flip_prob: float = 0.1
    total_steps: int = 1500
    batch_size: int = 64
    seed: int = 0
    # pins the GRL coefficient instead of following the schedule
    fixed_lambda: float = None

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError(f"mu0 must be > 0, got {self.mu0}")
        if not 0 <= self.flip_prob < 1:
            raise ValueError(f"flip_prob must lie in [0, 1), got {self.flip_prob}")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")


def _check_progress(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"training progress must lie in [0, 1], got {p}")


def lr_schedule(p, cfg):
    """``mu0 / (1 + alpha * p) ** beta``."""
    _check_progress(p)
    return cfg.mu0 / (1.0 + cfg.alpha * p) ** cfg.beta


def lambda_schedule(p, cfg):
    """``2 / (1 + exp(-gamma * p)) - 1``; rises from 0 towards 1."""
    _check_progress(p)
    return 2.0 / (1.0 + math.exp(-cfg.gamma * p)) - 1.0


def sgd_momentum_step(params, grads, velocity, mu, momentum):
    """Heavy-ball update in place: ``v <- momentum*v + g``, ``theta <- theta - mu*v``.

    All three arguments are ``name -> array`` maps; missing velocity entries
    start at zero.
    """
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise DimensionError(f"{name}: grad {g.shape} vs param {theta.shape}")
        v = velocity.get(name)
        if v is None:
            v = np.zeros_like(theta)
        elif v.shape != theta.shape:
            raise DimensionError(f"{name}: velocity {v.shape} vs param {theta.shape}")
        v = momentum * v + g
        velocity[name] = v
        theta -= mu * v


class MomentumSGD:
    """Momentum state for a model; applies ``sgd_momentum_step`` to chosen groups."""

    def __init__(self, model, momentum=0.9):
        self.model = model
        self.momentum = momentum
        self.velocity = {}

    def step(self, mu, groups):
        params, grads = {}, {}
        for name, layer, key in self.model.named_params(groups):
            params[name] = layer.params[key]
            grads[name] = layer.grads[key]
        sgd_momentum_step(params, grads, self.velocity, mu, self.momentum)


def flip_domain_labels(labels, flip_prob, rng):
    """Invert each binary label independently with probability ``flip_prob``."""
    labels = np.asarray(labels, dtype=np.int64)
    if flip_prob <= 0:
        return labels.copy()
    flips = rng.random(labels.shape) < flip_prob
    return np.where(flips, 1 - labels, labels)


@dataclass
class StepMetrics:
    step: int
    p: float
    mu: float
    lam: float
    label_loss: float
    domain_loss_raw: float = None
    domain_loss_scaled: float = None
    source_train_acc: float = None
    domain_acc: float = None


def compute_gradients(model, batch, lam, domain_targets=None):
    """Forward/backward on one batch, filling every layer's ``grads``.

    The label loss uses source rows only. When ``domain_targets`` is given
    the domain loss uses all rows and reaches the feature extractor through
    the gradient reversal layer scaled by ``lam``. Returns the raw losses and
    the logits used for the accuracy metrics.
    """
    src = batch.domain_labels == SOURCE
    if not src.any():
        raise ValueError("batch has no source samples; label loss undefined")
    model.lam = lam
    feats = model.extract_features(batch.frames)
    label_logits = model.label_head.forward(feats[src])
    label_loss, g_label = softmax_cross_entropy(label_logits, batch.class_labels[src])
    grad_feats = np.zeros_like(feats)
    grad_feats[src] = model.label_head.backward(g_label)
    domain_loss = domain_logits = None
    if domain_targets is not None:
        domain_logits = model.domain_head.forward(model.grl.forward(feats))
        domain_loss, g_domain = softmax_cross_entropy(domain_logits, domain_targets)
        grad_feats = grad_feats + model.grl.backward(model.domain_head.backward(g_domain))
    model.feature_extractor.backward(grad_feats)
    return label_loss, domain_loss, label_logits, domain_logits


def train_step(model, batch, step, cfg, optimizer, rng, mode="dann"):
    """One saddle-point SGD step; returns ``StepMetrics``.

    ``mode="baseline"`` trains feature extractor and label head only; the
    domain head is neither evaluated nor updated.
    """
    p = step / cfg.total_steps
    mu = lr_schedule(p, cfg)
    adversarial = mode == "dann"
    if adversarial:
        lam = lambda_schedule(p, cfg) if cfg.fixed_lambda is None else cfg.fixed_lambda
        targets = flip_domain_labels(batch.domain_labels, cfg.flip_prob, rng)
    elif mode == "baseline":
        lam, targets = 0.0, None
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    label_loss, domain_loss, label_logits, domain_logits = compute_gradients(
        model, batch, lam, targets
    )
    groups = ("feature", "label", "domain") if adversarial else ("feature", "label")
    optimizer.step(mu, groups)

    src = batch.domain_labels == SOURCE
    metrics = StepMetrics(
        step=step, p=p, mu=mu, lam=lam, label_loss=label_loss,
        source_train_acc=float(np.mean(label_logits.argmax(1) == batch.class_labels[src])),
    )
    if adversarial:
        metrics.domain_loss_raw = domain_loss
        metrics.domain_loss_scaled = lam * domain_loss
        metrics.domain_acc = float(np.mean(domain_logits.argmax(1) == batch.domain_labels))
    return metrics
