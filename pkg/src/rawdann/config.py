"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Every key is optional; unknown
keys are rejected. ``seed`` seeds both corpus generation and training.
"""
from dataclasses import dataclass, fields, replace

from rawdann.data import CorpusSpec
from rawdann.model import ArchConfig, ConfigError
from rawdann.optim import TrainConfig

CORPUS_KEYS = {
    "sample_rate": int, "n_classes": int, "f0": float, "f0_jitter": float,
    "f0_scale": float, "tilt_db": float, "noise": float, "formant_jitter": float,
    "formant_bandwidth": float, "voicing": float, "n_source_train": int, "n_target_train": int,
    "n_source_eval": int, "n_target_eval": int, "frames_per_utterance": int,
    "window_ms": float, "shift_ms": float, "context_frames": int,
}
ARCH_KEYS = {
    "conv1_width": int, "conv1_maps": int, "conv1_stride": int,
    "conv2_width": int, "conv2_maps": int, "conv2_stride": int,
    "pool": int, "label_depth": int, "label_width": int,
    "domain_depth": int, "domain_width": int,
}
TRAIN_KEYS = {
    "mu0": float, "alpha": float, "beta": float, "gamma": float,
    "momentum": float, "flip_prob": float, "total_steps": int,
    "batch_size": int, "fixed_lambda": float,
}
OTHER_KEYS = {"seed": int, "log_every": int}

def _parse_value(key, raw, kind):
    if key == "fixed_lambda" and raw.lower() in ("", "none"):
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text, source="<config>"):
    schema = {**CORPUS_KEYS, **ARCH_KEYS, **TRAIN_KEYS, **OTHER_KEYS}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw.strip(), schema[key])
    return values


@dataclass
class ExperimentConfig:
    corpus: CorpusSpec
    arch: ArchConfig
    train: TrainConfig
    log_every: int = 10

    @classmethod
    def from_values(cls, values, seed=None):
        values = dict(values)
        if seed is not None:
            values["seed"] = seed
        seed = values.get("seed", 0)
        try:
            corpus = CorpusSpec(seed=seed, **{k: v for k, v in values.items() if k in CORPUS_KEYS})
            arch_defaults = ArchConfig()
            convs = []
            for i, (w, m, s) in enumerate(arch_defaults.convs, 1):
                convs.append((values.get(f"conv{i}_width", w),
                               values.get(f"conv{i}_maps", m),
                               values.get(f"conv{i}_stride", s)))
            head = {k: v for k, v in values.items()
                    if k in ARCH_KEYS and not k.startswith("conv")}
            arch = ArchConfig(frame_length=corpus.frame_length(), convs=tuple(convs),
                              n_classes=corpus.n_classes, **head)
            train = TrainConfig(seed=seed, **{k: v for k, v in values.items() if k in TRAIN_KEYS})
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        log_every = values.get("log_every", 10)
        if log_every < 1:
            raise ConfigError("log_every must be >= 1")
        return cls(corpus, arch, train, log_every)

    @classmethod
    def load(cls, path, seed=None):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_values(parse_config_text(text, str(path)), seed)

    def with_seed(self, seed):
        return ExperimentConfig(replace(self.corpus, seed=seed), self.arch,
                                replace(self.train, seed=seed), self.log_every)


def dump_config(cfg):
    """Render a config back to ``key = value`` text (round-trips through ``load``)."""
    lines = [f"seed = {cfg.train.seed}"]
    for f in fields(CorpusSpec):
        if f.name in CORPUS_KEYS:
            lines.append(f"{f.name} = {getattr(cfg.corpus, f.name)}")
    for i, (w, m, s) in enumerate(cfg.arch.convs, 1):
        lines += [f"conv{i}_width = {w}", f"conv{i}_maps = {m}", f"conv{i}_stride = {s}"]
    for key in ("pool", "label_depth", "label_width", "domain_depth", "domain_width"):
        lines.append(f"{key} = {getattr(cfg.arch, key)}")
    for key in TRAIN_KEYS:
        value = getattr(cfg.train, key)
        lines.append(f"{key} = {'none' if value is None else value}")
    lines.append(f"log_every = {cfg.log_every}")
    return "\n".join(lines) + "\n"
