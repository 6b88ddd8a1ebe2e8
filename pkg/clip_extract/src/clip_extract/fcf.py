"""Standalone FCF1 writer.

The byte layout is the interface contract with the consuming engine
(little-endian throughout): magic "FCF1", version u32, d u32, C u32, N u64,
length-prefixed UTF-8 domain name and class names, C*d float32 class text
features row-major, then N records of (label u32, d float32).
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ExtractError

MAGIC = b"FCF1"
VERSION = 1


def _encode_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ExtractError(f"string too long for the format ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def write_fcf(path, domain_name: str, class_names: list[str],
              class_text_features: np.ndarray, features: np.ndarray,
              labels: np.ndarray) -> None:
    text = np.ascontiguousarray(class_text_features, dtype="<f4")
    feats = np.ascontiguousarray(features, dtype="<f4")
    labels = np.asarray(labels, dtype="<u4")
    c, d = text.shape
    n = feats.shape[0]
    if feats.ndim != 2 or feats.shape[1] != d:
        raise ExtractError(f"features must be (N, {d}), got {feats.shape}")
    if labels.shape != (n,):
        raise ExtractError(f"labels must be ({n},), got {labels.shape}")
    if len(class_names) != c:
        raise ExtractError(f"{len(class_names)} names for {c} text rows")

    parts = [
        MAGIC,
        struct.pack("<III", VERSION, d, c),
        struct.pack("<Q", n),
        _encode_str(domain_name),
    ]
    parts.extend(_encode_str(name) for name in class_names)
    parts.append(text.tobytes())
    rec = np.empty(n, dtype=[("label", "<u4"), ("feat", "<f4", (d,))])
    rec["label"] = labels
    rec["feat"] = feats
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
