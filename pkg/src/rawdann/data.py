"""Raw-signal framing, normalisation and a synthetic two-domain corpus.

The corpus stands in for a two-domain speech collection: each class is a set
of formant (resonance) frequencies imposed on a harmonic source. The target
domain raises the fundamental frequency, tilts the spectrum and adds noise,
which keeps the class structure while introducing a label-irrelevant cue.
"""
from dataclasses import dataclass

import numpy as np

from rawdann.tensor import DTYPE

SOURCE, TARGET = 0, 1
ABSENT = -1
NORM_EPS = 1e-8

# (F1, F2, F3) in Hz, vowel-like; classes use the first n_classes rows
DEFAULT_FORMANTS = (
    (280.0, 2250.0, 2900.0),
    (710.0, 1100.0, 2450.0),
    (310.0, 870.0, 2250.0),
    (530.0, 1840.0, 2480.0),
    (500.0, 700.0, 2600.0),
    (660.0, 1700.0, 2400.0),
    (400.0, 1900.0, 2550.0),
    (600.0, 1000.0, 2500.0),
)

SPLITS = ("source_train", "target_train", "source_eval", "target_eval")


@dataclass
class Utterance:
    samples: np.ndarray
    class_label: int
    domain_label: int


@dataclass
class Batch:
    frames: np.ndarray          # [B, 1, T]
    class_labels: np.ndarray    # int64 [B], ABSENT for target rows
    domain_labels: np.ndarray   # int64 [B]

    def __len__(self):
        return len(self.domain_labels)


@dataclass
class CorpusSpec:
    sample_rate: int = 8000
    n_classes: int = 4
    formants: tuple = None
    formant_bandwidth: float = 90.0
    formant_jitter: float = 0.04
    f0: float = 110.0
    f0_jitter: float = 0.08
    f0_scale: float = 1.6
    tilt_db: float = 0.0
    noise: float = 0.0
    voicing: float = 4.0
    n_source_train: int = 400
    n_target_train: int = 400
    n_source_eval: int = 200
    n_target_eval: int = 200
    frames_per_utterance: int = 5
    window_ms: float = 10.0
    shift_ms: float = 10.0
    context_frames: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got n_classes={self.n_classes}")
        if self.formants is None:
            if self.n_classes > len(DEFAULT_FORMANTS):
                raise ValueError(
                    f"only {len(DEFAULT_FORMANTS)} default formant sets; "
                    f"pass formants for n_classes={self.n_classes}"
                )
            self.formants = DEFAULT_FORMANTS[: self.n_classes]
        self.formants = tuple(tuple(float(f) for f in fs) for fs in self.formants)
        if len(self.formants) != self.n_classes or len(set(self.formants)) != self.n_classes:
            raise ValueError("formants must hold one distinct set per class")
        for name in ("f0", "f0_scale", "tilt_db", "noise", "formant_bandwidth"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def window_samples(self):
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    def shift_samples(self):
        return int(round(self.shift_ms * self.sample_rate / 1000.0))

    def frame_length(self):
        return self.context_frames * self.window_samples()

    def utterance_length(self):
        n_windows = self.context_frames + self.frames_per_utterance - 1
        return (n_windows - 1) * self.shift_samples() + self.window_samples()


def frame_signal(samples, sample_rate, window_ms=10.0, shift_ms=10.0, context_frames=31):
    """Cut a signal into context windows of ``context_frames`` rectangular frames.

    Each output is a ``[1, T]`` array with ``T = context_frames * window``
    samples, centred on successive frames. Signals too short for a single
    context window give an empty list.
    """
    samples = np.asarray(samples, dtype=DTYPE)
    window = int(round(window_ms * sample_rate / 1000.0))
    shift = int(round(shift_ms * sample_rate / 1000.0))
    if window < 1 or shift < 1 or context_frames < 1:
        raise ValueError("window, shift and context must be positive")
    if len(samples) < window:
        return []
    n_frames = (len(samples) - window) // shift + 1
    left = context_frames // 2
    right = context_frames - 1 - left
    out = []
    for centre in range(left, n_frames - right):
        parts = [
            samples[j * shift: j * shift + window]
            for j in range(centre - left, centre + right + 1)
        ]
        out.append(np.concatenate(parts)[None, :])
    return out


def normalize(frames, stats=None):
    """Per-dimension standardisation. Returns ``(normalized, (mean, std))``.

    With ``stats=None`` the statistics are estimated from ``frames``.
    """
    frames = np.asarray(frames, dtype=DTYPE)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"normalize expects [N>=1, T] frames, got {frames.shape}")
    if stats is None:
        mean = frames.mean(axis=0)
        std = frames.std(axis=0)
    else:
        mean, std = (np.asarray(s, dtype=DTYPE) for s in stats)
    return (frames - mean) / np.maximum(std, NORM_EPS), (mean, std)


def _utterance_rng(seed, split_index, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(split_index, index)))


def synthesize(spec, class_label, domain, rng):
    """One utterance: harmonic source at F0 shaped by the class formant envelope."""
    n = spec.utterance_length()
    sr = spec.sample_rate
    t = np.arange(n) / sr
    f0 = spec.f0 * (1.0 + spec.f0_jitter * rng.uniform(-1.0, 1.0))
    if domain == TARGET:
        f0 *= spec.f0_scale
    formants = np.asarray(spec.formants[class_label])
    formants = formants * (1.0 + spec.formant_jitter * rng.uniform(-1.0, 1.0, len(formants)))
    nyquist = 0.5 * sr
    harmonics = np.arange(1, int(0.95 * nyquist // f0) + 1) * f0
    envelope = np.exp(
        -0.5 * ((harmonics[:, None] - formants[None, :]) / spec.formant_bandwidth) ** 2
    ).sum(axis=1)
    envelope += 0.02
    # F0-locked low harmonics with a -12 dB/octave source slope; carries no class information
    envelope += spec.voicing * (harmonics / f0) ** -2.0
    if domain == TARGET and spec.tilt_db:
        envelope *= 10.0 ** (spec.tilt_db * np.log2(harmonics / 1000.0) / 20.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(harmonics))
    signal = (envelope[:, None] * np.sin(2.0 * np.pi * harmonics[:, None] * t + phases[:, None])).sum(axis=0)
    signal /= np.sqrt(np.mean(signal ** 2)) + 1e-12
    if domain == TARGET and spec.noise:
        signal += spec.noise * rng.standard_normal(n)
    signal *= rng.uniform(0.5, 1.5)
    # stored as float32 on disk; round now so memory and file agree
    return signal.astype(np.float32).astype(DTYPE)


def generate_split(spec, split):
    split_index = SPLITS.index(split)
    domain = SOURCE if split.startswith("source") else TARGET
    count = getattr(spec, "n_" + split)
    utts = []
    for i in range(count):
        label = i % spec.n_classes
        rng = _utterance_rng(spec.seed, split_index, i)
        samples = synthesize(spec, label, domain, rng)
        stored = ABSENT if split == "target_train" else label
        utts.append(Utterance(samples, stored, domain))
    return utts


def generate_corpus(spec):
    """All four splits, keyed by name. Target training utterances are unlabeled."""
    return {split: generate_split(spec, split) for split in SPLITS}


def frame_utterances(utts, spec):
    """Stack framed utterances into ``(frames[N, T], class_labels[N], domain_labels[N])``."""
    frames, classes, domains = [], [], []
    for u in utts:
        for f in frame_signal(u.samples, spec.sample_rate, spec.window_ms,
                              spec.shift_ms, spec.context_frames):
            frames.append(f[0])
            classes.append(u.class_label)
            domains.append(u.domain_label)
    t = spec.frame_length()
    if not frames:
        return np.zeros((0, t)), np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.stack(frames), np.asarray(classes, np.int64), np.asarray(domains, np.int64)


def make_batches(source, target, batch_size, seed, n_batches):
    """Yield ``n_batches`` mixed batches.

    ``source``/``target`` are ``(frames[N, T], class_labels[N])`` pairs; pass
    ``target=None`` for source-only batches. Mixed batches take
    ``ceil(B/2)`` source and ``floor(B/2)`` target frames; each pool is
    reshuffled whenever it is exhausted.
    """
    src_frames, src_labels = source
    if len(src_frames) == 0:
        raise ValueError("source split is empty")
    if target is not None and len(target[0]) == 0:
        raise ValueError("target split is empty")
    n_src = batch_size if target is None else (batch_size + 1) // 2
    n_tgt = batch_size - n_src
    rng = np.random.default_rng(seed)
    src_iter = _index_stream(len(src_frames), rng)
    tgt_iter = None if target is None else _index_stream(len(target[0]), rng)
    for _ in range(n_batches):
        si = np.fromiter((next(src_iter) for _ in range(n_src)), np.int64, n_src)
        frames = [src_frames[si]]
        classes = [src_labels[si]]
        domains = [np.full(n_src, SOURCE, np.int64)]
        if tgt_iter is not None and n_tgt:
            ti = np.fromiter((next(tgt_iter) for _ in range(n_tgt)), np.int64, n_tgt)
            frames.append(target[0][ti])
            classes.append(np.full(n_tgt, ABSENT, np.int64))
            domains.append(np.full(n_tgt, TARGET, np.int64))
        frames = np.concatenate(frames)
        yield Batch(frames[:, None, :], np.concatenate(classes), np.concatenate(domains))


def _index_stream(n, rng):
    while True:
        yield from rng.permutation(n)
