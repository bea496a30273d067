"""Deterministic desk-scale dataset: one geometric glyph per class.

Each image is a dim noisy background with a bright class glyph (bar,
diagonal, cross, box, ...). Ten glyphs are defined; class k uses glyph k.
Everything is reproducible from the master seed.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .errors import MalformedFileError
from .image import Image, load_image, save_image

MAX_CLASSES = 10

_BACKGROUND = 0.15
_NOISE_SCALE = 0.08
_GLYPH_GAIN = 0.65


def _glyph_mask(label: int, height: int, width: int) -> np.ndarray:
    """Binary glyph pattern for a class, scaled to the image size."""
    mask = np.zeros((height, width))
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    mid_r, mid_c = height // 2, width // 2
    thick = max(1, height // 8)
    if label == 0:  # horizontal bar
        mask[mid_r - thick : mid_r + thick, :] = 1.0
    elif label == 1:  # vertical bar
        mask[:, mid_c - thick : mid_c + thick] = 1.0
    elif label == 2:  # main diagonal
        mask[np.abs(rows - cols * (height - 1) / max(width - 1, 1)) < thick + 0.5] = 1.0
    elif label == 3:  # anti-diagonal
        mask[
            np.abs(rows - (height - 1 - cols * (height - 1) / max(width - 1, 1)))
            < thick + 0.5
        ] = 1.0
    elif label == 4:  # plus
        mask[mid_r - thick : mid_r + thick, :] = 1.0
        mask[:, mid_c - thick : mid_c + thick] = 1.0
    elif label == 5:  # X
        diag = np.abs(rows - cols * (height - 1) / max(width - 1, 1)) < thick + 0.5
        anti = (
            np.abs(rows - (height - 1 - cols * (height - 1) / max(width - 1, 1)))
            < thick + 0.5
        )
        mask[diag | anti] = 1.0
    elif label == 6:  # hollow box
        mask[1:-1, 1:-1] = 1.0
        inset = 1 + thick
        mask[inset:-inset, inset:-inset] = 0.0
    elif label == 7:  # filled center square
        q_r, q_c = height // 4, width // 4
        mask[q_r : height - q_r, q_c : width - q_c] = 1.0
    elif label == 8:  # L corner
        mask[:, : 2 * thick] = 1.0
        mask[-2 * thick :, :] = 1.0
    elif label == 9:  # four dots
        q_r, q_c = height // 4, width // 4
        for r in (q_r, height - 1 - q_r):
            for c in (q_c, width - 1 - q_c):
                mask[max(r - 1, 0) : r + 1, max(c - 1, 0) : c + 1] = 1.0
    else:
        raise ValueError(f"no glyph defined for class {label}")
    return mask


def _render(label: int, height: int, width: int, rng: np.random.Generator) -> Image:
    noise = rng.normal(0.0, _NOISE_SCALE, size=(height, width))
    pixels = _BACKGROUND + noise + _GLYPH_GAIN * _glyph_mask(label, height, width)
    return Image(np.clip(pixels, 0.0, 1.0)[:, :, np.newaxis])


@dataclasses.dataclass(frozen=True)
class SyntheticDataset:
    train: tuple[tuple[Image, int], ...]
    test: tuple[tuple[Image, int], ...]
    class_count: int
    image_size: tuple[int, int]
    seed: int


def make_dataset(
    classes: int,
    per_class: int,
    size: tuple[int, int] = (8, 8),
    seed: int = 0,
    test_fraction: float = 0.2,
) -> SyntheticDataset:
    """classes * per_class images, split per class into train/test."""
    if not 2 <= classes <= MAX_CLASSES:
        raise ValueError(f"classes must be in [2, {MAX_CLASSES}], got {classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    height, width = size
    if height < 4 or width < 4:
        raise ValueError(f"images must be at least 4x4, got {size}")

    rng = np.random.default_rng(seed)
    test_count = max(1, round(per_class * test_fraction)) if per_class > 1 else 0
    train, test = [], []
    for label in range(classes):
        for idx in range(per_class):
            img = _render(label, height, width, rng)
            if idx < per_class - test_count:
                train.append((img, label))
            else:
                test.append((img, label))
    return SyntheticDataset(tuple(train), tuple(test), classes, (height, width), seed)


def save_dataset(dataset: SyntheticDataset, directory: str) -> None:
    """Write train/ and test/ PNGs plus manifest.json.

    Saved pixels are 8-bit quantized, so a reloaded dataset is the
    quantized twin of the in-memory one.
    """
    manifest = {
        "classes": dataset.class_count,
        "image_size": [dataset.image_size[0], dataset.image_size[1], 1],
        "seed": dataset.seed,
        "train": [],
        "test": [],
    }
    for split_name, examples in (("train", dataset.train), ("test", dataset.test)):
        split_dir = os.path.join(directory, split_name)
        os.makedirs(split_dir, exist_ok=True)
        for idx, (img, label) in enumerate(examples):
            rel = os.path.join(split_name, f"c{label}_{idx:04d}.png")
            save_image(img, os.path.join(directory, rel), format="png")
            manifest[split_name].append({"path": rel, "label": label})
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory: str) -> SyntheticDataset:
    manifest_path = os.path.join(directory, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{manifest_path}: not valid JSON ({exc})") from exc
    try:
        splits = {}
        for split_name in ("train", "test"):
            examples = []
            for entry in manifest[split_name]:
                img = load_image(os.path.join(directory, entry["path"]))
                examples.append((img, int(entry["label"])))
            splits[split_name] = tuple(examples)
        size = manifest["image_size"]
        return SyntheticDataset(
            splits["train"],
            splits["test"],
            int(manifest["classes"]),
            (int(size[0]), int(size[1])),
            int(manifest["seed"]),
        )
    except (KeyError, TypeError) as exc:
        raise MalformedFileError(f"{manifest_path}: bad manifest ({exc})") from exc
