"""Feature encoders: the pretrained CLIP model, and a deterministic hash
encoder used for tests and plumbing dry runs (it produces stable nonsense,
not semantics)."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ExtractError

CLIP_MODEL_ID = "openai/clip-vit-base-patch32"
CLIP_DIM = 512


class HashEncoder:
    """Deterministic stand-in: embeddings derived from content digests."""

    name = "hash"
    dim = CLIP_DIM

    def _embed(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "little")
        return np.random.default_rng(seed).standard_normal(self.dim).astype(np.float32)

    def encode_images(self, images) -> np.ndarray:
        return np.stack([self._embed(img.tobytes()) for img in images])

    def encode_texts(self, texts) -> np.ndarray:
        return np.stack([self._embed(t.encode("utf-8")) for t in texts])


class ClipEncoder:
    """The pretrained dual encoder; loaded lazily, CPU by default."""

    name = CLIP_MODEL_ID
    dim = CLIP_DIM

    def __init__(self, device: str = "cpu", batch_size: int = 32):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ExtractError(
                "the pretrained encoder needs the torch and transformers "
                "packages (pip install 'clip-extract[clip]')") from exc
        try:
            self._model = CLIPModel.from_pretrained(CLIP_MODEL_ID).to(device).eval()
            self._processor = CLIPProcessor.from_pretrained(CLIP_MODEL_ID)
        except Exception as exc:
            raise ExtractError(f"could not load {CLIP_MODEL_ID}: {exc}") from exc
        self._torch = torch
        self._device = device
        self._batch_size = batch_size

    def encode_images(self, images) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for i in range(0, len(images), self._batch_size):
                batch = self._processor(
                    images=images[i:i + self._batch_size], return_tensors="pt"
                ).to(self._device)
                out = self._model.get_image_features(**batch)
                chunks.append(out.cpu().numpy().astype(np.float32))
        return np.concatenate(chunks)

    def encode_texts(self, texts) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for i in range(0, len(texts), self._batch_size):
                batch = self._processor(
                    text=texts[i:i + self._batch_size], return_tensors="pt",
                    padding=True
                ).to(self._device)
                out = self._model.get_text_features(**batch)
                chunks.append(out.cpu().numpy().astype(np.float32))
        return np.concatenate(chunks)


def make_encoder(kind: str, device: str = "cpu", batch_size: int = 32):
    if kind == "hash":
        return HashEncoder()
    if kind == "clip":
        return ClipEncoder(device=device, batch_size=batch_size)
    raise ExtractError(f"unknown encoder {kind!r}, expected 'clip' or 'hash'")
