"""Offline tool that encodes image-folder datasets and class prompts with a
pretrained CLIP model into FCF1 feature files for the federated engine."""

__version__ = "0.1.0"

from .errors import ExtractError
from .extract import (build_class_text_features, extract_benchmark,
                      extract_domain, prompt_for, scan_domain)

__all__ = [
    "ExtractError",
    "build_class_text_features",
    "extract_benchmark",
    "extract_domain",
    "prompt_for",
    "scan_domain",
]
