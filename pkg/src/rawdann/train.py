"""Training loop, evaluation helpers and the source-only vs adapted experiment."""
import math
from dataclasses import dataclass

import numpy as np

from rawdann.data import SOURCE, TARGET, frame_utterances, generate_corpus, make_batches, normalize
from rawdann.model import DannModel
from rawdann.optim import MomentumSGD, train_step


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""


def seed_streams(seed):
    """Independent seeds for model init, batch order and label flipping."""
    children = np.random.SeedSequence(seed).spawn(3)
    init, batches, flips = (int(c.generate_state(1)[0]) for c in children)
    return init, batches, flips


def fit(model, cfg, source, target, mode="dann", callback=None, batches=None):
    """Run ``cfg.total_steps`` training steps.

    ``source``/``target`` are ``(frames, class_labels)``; ``target`` may be
    ``None`` in baseline mode. ``callback(metrics)`` sees every step.
    Returns the final step's metrics.
    """
    _, batch_seed, flip_seed = seed_streams(cfg.seed)
    if batches is None:
        batches = make_batches(source, target, cfg.batch_size, batch_seed, cfg.total_steps)
    optimizer = MomentumSGD(model, cfg.momentum)
    rng = np.random.default_rng(flip_seed)
    metrics = None
    for step, batch in enumerate(batches):
        metrics = train_step(model, batch, step, cfg, optimizer, rng, mode)
        losses = [metrics.label_loss, metrics.domain_loss_raw]
        if any(v is not None and not math.isfinite(v) for v in losses):
            raise NumericalError(f"non-finite loss at step {step}: {losses}")
        if callback is not None:
            callback(metrics)
    return metrics


def _chunked(fn, frames, chunk=512):
    return np.concatenate([fn(frames[i:i + chunk]) for i in range(0, len(frames), chunk)])


def accuracy(model, frames, labels):
    if len(frames) == 0:
        return float("nan")
    return float(np.mean(_chunked(model.predict, frames) == labels))


def domain_accuracy(model, frames, domains):
    return float(np.mean(_chunked(model.predict_domain, frames) == domains))


@dataclass
class PreparedCorpus:
    source_train: tuple
    target_train: tuple
    source_eval: tuple
    target_eval: tuple
    stats: tuple


def prepare(splits, spec, stats=None):
    """Frame every split and normalise with statistics of the source training frames."""
    framed = {k: frame_utterances(v, spec) for k, v in splits.items()}
    if stats is None:
        _, stats = normalize(framed["source_train"][0])
    out = {}
    for k, (frames, classes, _) in framed.items():
        norm = normalize(frames, stats)[0] if len(frames) else frames
        out[k] = (norm, classes)
    return PreparedCorpus(stats=stats, **out)


def run_pair(arch, cfg, corpus):
    """Train a source-only and an adapted model from the same initialisation.

    Returns a dict of accuracies for both models plus the adapted model's
    domain accuracy on the pooled, balanced evaluation sets.
    """
    init_seed, _, _ = seed_streams(cfg.seed)
    result = {}
    for mode in ("baseline", "dann"):
        model = DannModel(arch, seed=init_seed)
        target = corpus.target_train if mode == "dann" else None
        fit(model, cfg, corpus.source_train, target, mode)
        result[mode] = {
            "source": accuracy(model, *corpus.source_eval),
            "target": accuracy(model, *corpus.target_eval),
        }
        if mode == "dann":
            frames = np.concatenate([corpus.source_eval[0], corpus.target_eval[0]])
            domains = np.concatenate([
                np.full(len(corpus.source_eval[0]), SOURCE),
                np.full(len(corpus.target_eval[0]), TARGET),
            ])
            result["dann"]["domain"] = domain_accuracy(model, frames, domains)
    return result


def adaptation_experiment(arch, cfg, spec, seeds):
    """Repeat ``run_pair`` on fresh corpora and initialisations for each seed."""
    from dataclasses import replace

    runs = []
    for seed in seeds:
        corpus = prepare(generate_corpus(replace(spec, seed=seed)), spec)
        runs.append(run_pair(arch, replace(cfg, seed=seed), corpus))
    return runs
