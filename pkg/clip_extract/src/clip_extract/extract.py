"""Scan image-folder benchmarks (one subfolder per domain, one per class),
encode everything, and emit one FCF1 file per domain plus a JSON manifest."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ExtractError
from .fcf import write_fcf

PROMPT_TEMPLATE = "a photo of a {}"
IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".webp")

# Known benchmark presets: expected class counts for a sanity check.
BENCHMARKS = {
    "pacs": {"classes": 7},
    "vlcs": {"classes": 5},
    "office-home": {"classes": 65},
    "auto": {"classes": None},
}


@dataclass
class DomainFolder:
    """One domain directory: class subfolders mapping to sorted image paths."""

    root: str
    name: str
    classes: dict[str, list[str]] = field(default_factory=dict)


def prompt_for(class_name: str) -> str:
    """Prompt text for one class: lowercased, underscores become spaces."""
    return PROMPT_TEMPLATE.format(class_name.lower().replace("_", " "))


def scan_domain(path) -> DomainFolder:
    """Collect class subfolders and their image files in sorted order, so
    re-runs see the same sequence."""
    path = os.path.abspath(path)
    if not os.path.isdir(path):
        raise ExtractError(f"domain folder {path} does not exist")
    folder = DomainFolder(root=path, name=os.path.basename(path))
    for entry in sorted(os.listdir(path)):
        class_dir = os.path.join(path, entry)
        if not os.path.isdir(class_dir):
            continue
        images = sorted(
            os.path.join(class_dir, f)
            for f in os.listdir(class_dir)
            if f.lower().endswith(IMAGE_EXTENSIONS)
        )
        folder.classes[entry] = images
    if not folder.classes:
        raise ExtractError(f"domain folder {path} has no class subfolders")
    if all(len(v) == 0 for v in folder.classes.values()):
        raise ExtractError(f"domain folder {path} contains no images")
    return folder


def build_class_text_features(class_names, encoder) -> np.ndarray:
    """Encode one prompt per class; rows are stored unnormalized (the
    consuming engine normalizes)."""
    names = list(class_names)
    if not names:
        raise ExtractError("class list is empty")
    if len(set(names)) != len(names):
        raise ExtractError(f"duplicate class names in {names}")
    return encoder.encode_texts([prompt_for(n) for n in names])


def extract_domain(folder: DomainFolder, out_path, encoder,
                   class_names=None) -> dict:
    """Encode one domain into an FCF1 file; returns its manifest entry.

    Images are processed in sorted-path order and undecodable files are
    skipped with a warning, so output is reproducible run to run.
    """
    names = list(class_names) if class_names is not None else sorted(folder.classes)
    if sorted(folder.classes) != sorted(names):
        raise ExtractError(
            f"domain {folder.name} has classes {sorted(folder.classes)}, "
            f"expected {sorted(names)}")

    text_features = build_class_text_features(names, encoder)
    images, labels, skipped = [], [], []
    for label, name in enumerate(names):
        for img_path in folder.classes[name]:
            try:
                with Image.open(img_path) as img:
                    images.append(img.convert("RGB").copy())
            except Exception as exc:
                skipped.append(img_path)
                print(f"warning: skipping undecodable {img_path}: {exc}",
                      file=sys.stderr)
                continue
            labels.append(label)
    if not images:
        raise ExtractError(f"domain {folder.name} contains no decodable images")

    features = encoder.encode_images(images)
    write_fcf(out_path, folder.name, names, text_features, features,
              np.asarray(labels))
    return {
        "file": os.path.basename(str(out_path)),
        "n_images": len(images),
        "skipped": [os.path.relpath(p, folder.root) for p in skipped],
    }


def extract_benchmark(root, out_dir, encoder, benchmark: str = "auto") -> dict:
    """Extract every domain under ``root`` and write the manifest."""
    if benchmark not in BENCHMARKS:
        raise ExtractError(
            f"unknown benchmark {benchmark!r}, expected one of {sorted(BENCHMARKS)}")
    root = os.path.abspath(root)
    if not os.path.isdir(root):
        raise ExtractError(f"benchmark root {root} does not exist")
    domain_dirs = sorted(
        e for e in os.listdir(root) if os.path.isdir(os.path.join(root, e)))
    if not domain_dirs:
        raise ExtractError(f"benchmark root {root} has no domain subfolders")

    folders = [scan_domain(os.path.join(root, d)) for d in domain_dirs]
    class_names = sorted(folders[0].classes)
    for folder in folders[1:]:
        if sorted(folder.classes) != class_names:
            raise ExtractError(
                f"class sets differ: {folders[0].name} has {class_names}, "
                f"{folder.name} has {sorted(folder.classes)}")
    expected = BENCHMARKS[benchmark]["classes"]
    if expected is not None and len(class_names) != expected:
        raise ExtractError(
            f"benchmark {benchmark} should have {expected} classes, "
            f"found {len(class_names)}")

    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "model": encoder.name,
        "dim": encoder.dim,
        "prompt_template": PROMPT_TEMPLATE,
        "benchmark": benchmark,
        "classes": class_names,
        "domains": {},
    }
    for folder in folders:
        out_path = os.path.join(out_dir, f"{folder.name}.fcf")
        manifest["domains"][folder.name] = extract_domain(
            folder, out_path, encoder, class_names)
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
