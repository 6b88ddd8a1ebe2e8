"""Feature datasets: the FCF1 file format, 60/20/20 splitting, batching, and
a synthetic domain-shifted generator for self-contained experiments.

FCF1 layout, all integers and floats little-endian:

    magic "FCF1" (4 bytes)
    version            u32
    feature dim d      u32
    class count C      u32
    sample count N     u64
    domain name        u16 byte length + UTF-8
    C class names      u16 byte length + UTF-8, each
    class text feats   C*d float32, row-major
    N records          label u32 + d float32, each

Features are stored as 32-bit floats and widened to 64-bit on load; training
math never narrows back down.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, FormatError, ParameterError
from .numerics import rowwise_l2_normalize

FCF_MAGIC = b"FCF1"
FCF_VERSION = 1


@dataclass(frozen=True)
class FeatureDataset:
    """Frozen per-sample image features plus per-class text features for one
    client/domain. Immutable after construction; safe to share across clients."""

    domain_name: str
    class_names: tuple[str, ...]
    class_text_features: np.ndarray  # (C, d) float64
    features: np.ndarray             # (N, d) float64
    labels: np.ndarray               # (N,) int64

    def __post_init__(self):
        text = np.asarray(self.class_text_features, dtype=np.float64)
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if text.ndim != 2:
            raise DataValidationError(f"class text features must be 2-D, got {text.shape}")
        c, d = text.shape
        if c < 1 or d < 1:
            raise DataValidationError(f"need at least one class and one dimension, got {text.shape}")
        if len(self.class_names) != c:
            raise DataValidationError(
                f"{len(self.class_names)} class names for {c} text feature rows")
        if feats.ndim != 2 or feats.shape[1] != d:
            raise DataValidationError(
                f"features must be (N, {d}), got {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise DataValidationError(
                f"labels must be ({feats.shape[0]},), got {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise DataValidationError(
                f"labels must lie in [0, {c}), got range "
                f"[{labels.min()}, {labels.max()}]")
        if not (np.all(np.isfinite(text)) and np.all(np.isfinite(feats))):
            raise DataValidationError("features contain non-finite values")
        for arr in (text, feats, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "class_text_features", text)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return self.class_text_features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.class_text_features.shape[1]


@dataclass(frozen=True)
class SplitDataset:
    """Train/valid/test index lists into one FeatureDataset; pairwise disjoint
    and jointly exhaustive."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


def _encode_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ParameterError(f"string too long for format ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def write_feature_file(ds: FeatureDataset, path) -> None:
    """Serialize a dataset to FCF1. Written atomically (temp file + rename)."""
    d = ds.feature_dim
    parts = [
        FCF_MAGIC,
        struct.pack("<III", FCF_VERSION, d, ds.n_classes),
        struct.pack("<Q", ds.n_samples),
        _encode_str(ds.domain_name),
    ]
    for name in ds.class_names:
        parts.append(_encode_str(name))
    parts.append(ds.class_text_features.astype("<f4").tobytes())
    rec = np.empty(ds.n_samples, dtype=[("label", "<u4"), ("feat", "<f4", (d,))])
    rec["label"] = ds.labels
    rec["feat"] = ds.features
    parts.append(rec.tobytes())

    payload = b"".join(parts)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    """Sequential byte reader that reports the offset of any violation."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated while reading {what}", offset=self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def string(self, what: str) -> str:
        n = self.u16(f"{what} length")
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{what} is not valid UTF-8", offset=self.pos - n) from exc


def read_feature_file(path) -> FeatureDataset:
    """Parse an FCF1 file, rejecting bad magic, version, truncation, or
    trailing bytes, each with the offending byte offset."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != FCF_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FCF_MAGIC!r}", offset=0)
    version = r.u32("version")
    if version != FCF_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    d = r.u32("feature dim")
    c = r.u32("class count")
    n = r.u64("sample count")
    if d < 1 or c < 1:
        raise FormatError(f"illegal header (d={d}, C={c})", offset=8)
    domain_name = r.string("domain name")
    class_names = [r.string(f"class name {i}") for i in range(c)]

    text_bytes = r.take(4 * c * d, "class text features")
    text = np.frombuffer(text_bytes, dtype="<f4").reshape(c, d).astype(np.float64)

    rec_dtype = np.dtype([("label", "<u4"), ("feat", "<f4", (d,))])
    rec_bytes = r.take(n * rec_dtype.itemsize, "sample records")
    if r.pos != len(data):
        raise FormatError(
            f"{len(data) - r.pos} trailing bytes after declared content", offset=r.pos)
    rec = np.frombuffer(rec_bytes, dtype=rec_dtype)
    labels = rec["label"].astype(np.int64)
    feats = rec["feat"].astype(np.float64).reshape(n, d)
    if labels.size and labels.max() >= c:
        raise DataValidationError(
            f"label {labels.max()} out of range for {c} classes")
    return FeatureDataset(
        domain_name=domain_name,
        class_names=tuple(class_names),
        class_text_features=text,
        features=feats,
        labels=labels,
    )


def split_60_20_20(n: int, seed) -> SplitDataset:
    """Seeded shuffle then contiguous 60/20/20 assignment; train and valid
    round down, test takes the remainder."""
    if n < 5:
        raise ParameterError(f"need at least 5 samples to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = (3 * n) // 5
    n_valid = n // 5
    return SplitDataset(
        train=perm[:n_train],
        valid=perm[n_train:n_train + n_valid],
        test=perm[n_train + n_valid:],
    )


def make_batches(indices, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle, then chunk. A leftover chunk of size 1 is dropped because the
    contrastive loss degenerates to zero on a single sample."""
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(np.asarray(indices, dtype=np.int64))
    batches = [order[i:i + batch_size] for i in range(0, order.size, batch_size)]
    if batches and batches[-1].size == 1:
        batches.pop()
    return batches


def generate_synthetic_suite(n_domains: int, n_per_domain: int, d: int, c: int,
                             shift: float, seed,
                             noise_lo: float = 0.05,
                             noise_hi: float = 0.8) -> list[FeatureDataset]:
    """Build one domain-shifted suite of feature datasets, fully determined
    by the seed.

    All domains share one set of C random orthonormal class text vectors.
    Each domain's class means are those vectors plus a domain-specific random
    offset of norm ``shift``. Samples are mean plus per-coordinate Gaussian
    noise, then L2-normalized. Three quarters of the coordinates (a fixed,
    seed-chosen subset shared by every domain) carry heavy noise
    (``noise_hi``), the rest light noise (``noise_lo``): a hard enough
    denoising problem that pooling clients' knowledge measurably beats what
    any one client can learn alone, and the gain carries over to unseen
    domains because the noisy subset is the same everywhere.
    """
    if n_domains < 2:
        raise ParameterError(f"need at least 2 domains, got {n_domains}")
    if c < 2:
        raise ParameterError(f"need at least 2 classes, got {c}")
    if d < c:
        raise ParameterError(f"feature dim {d} must be >= class count {c}")
    if n_per_domain < 1:
        raise ParameterError(f"need at least 1 sample per domain, got {n_per_domain}")
    if shift < 0:
        raise ParameterError(f"shift must be >= 0, got {shift}")

    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, c)))
    class_vecs = q.T.copy()  # (C, d) orthonormal rows

    sigma = np.full(d, noise_lo)
    noisy_coords = rng.choice(d, size=(3 * d) // 4, replace=False)
    sigma[noisy_coords] = noise_hi

    class_names = tuple(f"class{i}" for i in range(c))
    labels = np.arange(n_per_domain, dtype=np.int64) % c

    suite = []
    for dom in range(n_domains):
        direction = rng.standard_normal(d)
        offset = shift * direction / np.linalg.norm(direction)
        means = class_vecs + offset
        noise = rng.standard_normal((n_per_domain, d)) * sigma
        feats = rowwise_l2_normalize(means[labels] + noise)
        suite.append(FeatureDataset(
            domain_name=f"domain{dom}",
            class_names=class_names,
            class_text_features=class_vecs,
            features=feats,
            labels=labels,
        ))
    return suite
