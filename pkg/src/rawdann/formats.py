"""Little-endian binary formats: checkpoints, corpora and normalisation stats.

Checkpoint ("DANN"): version u32, tensor count u32, then per tensor a u32
name length, UTF-8 name, u32 rank, u32 dims, float64 data (row-major).

Corpus ("DCRP"): version u32, sample rate u32, utterance count u32, then
per utterance: domain u8, class i32 (-1 when unlabeled), sample count u32,
float32 samples.

Stats ("DSTA"): frame length u32, then mean and std as float64 arrays.
"""
import struct

import numpy as np

from rawdann.data import Utterance

CHECKPOINT_MAGIC = b"DANN"
CORPUS_MAGIC = b"DCRP"
STATS_MAGIC = b"DSTA"
CHECKPOINT_VERSION = 1
CORPUS_VERSION = 1


class FormatError(ValueError):
    """File has the wrong magic, an unsupported version, or is truncated."""


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.path}: {len(self.buf) - self.pos} trailing bytes")


def _read(path, magic, version=None):
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf, path)
    got = r.take(4)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version is not None:
        (v,) = r.unpack("<I")
        if v != version:
            raise FormatError(f"{path}: format version {v} unsupported (expected {version})")
    return r


def encode_checkpoint(tensors):
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, value in tensors.items():
        value = np.asarray(value, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack(f"<I{value.ndim}I", value.ndim, *value.shape))
        parts.append(value.tobytes(order="C"))
    return b"".join(parts)


def save_checkpoint(path, tensors):
    """Write an ordered ``name -> array`` mapping."""
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(tensors))


def load_checkpoint(path):
    r = _read(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("<I")
        try:
            name = r.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: tensor name is not UTF-8") from exc
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = r.array("<f8", size).astype(np.float64).reshape(dims)
    r.finish()
    return tensors


def save_corpus(path, utterances, sample_rate):
    parts = [CORPUS_MAGIC, struct.pack("<III", CORPUS_VERSION, sample_rate, len(utterances))]
    for u in utterances:
        samples = np.asarray(u.samples, dtype="<f4")
        parts.append(struct.pack("<BiI", u.domain_label, u.class_label, len(samples)))
        parts.append(samples.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_corpus(path):
    """Return ``(utterances, sample_rate)``; samples come back as float64."""
    r = _read(path, CORPUS_MAGIC, CORPUS_VERSION)
    sample_rate, count = r.unpack("<II")
    utts = []
    for _ in range(count):
        domain, label, n = r.unpack("<BiI")
        samples = r.array("<f4", n).astype(np.float64)
        utts.append(Utterance(samples, label, domain))
    r.finish()
    return utts, sample_rate


def save_stats(path, mean, std):
    mean = np.ascontiguousarray(mean, dtype="<f8")
    std = np.ascontiguousarray(std, dtype="<f8")
    if mean.shape != std.shape or mean.ndim != 1:
        raise ValueError("mean and std must be 1-d arrays of equal length")
    with open(path, "wb") as fh:
        fh.write(STATS_MAGIC + struct.pack("<I", len(mean)) + mean.tobytes() + std.tobytes())


def load_stats(path):
    r = _read(path, STATS_MAGIC)
    (t,) = r.unpack("<I")
    mean = r.array("<f8", t).astype(np.float64)
    std = r.array("<f8", t).astype(np.float64)
    r.finish()
    return mean, std
