"""Shared test helpers: synthetic smear fixtures and tiny image factories."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from allprep.dataprep import CLASS_LABELS
from allprep.raster import RasterImage, save_image


def make_smear(seed: int, size: int = 224) -> tuple[RasterImage, np.ndarray]:
    """A synthetic stained-smear image with a known ground-truth mask.

    Magenta-ish elliptical "nucleus" of one constant color on a noisy
    gray background.  Returns (image, boolean ground-truth mask).
    """
    rng = np.random.default_rng(seed)
    bg = int(rng.integers(172, 201))
    pixels = np.full((size, size, 3), bg, dtype=np.int64)
    pixels += rng.integers(-6, 7, size=(size, size, 3))
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)

    cy, cx = rng.integers(size * 3 // 7, size * 4 // 7, size=2)
    ry, rx = rng.integers(size // 6, size // 3, size=2)
    color = (
        int(rng.integers(185, 226)),
        int(rng.integers(40, 86)),
        int(rng.integers(165, 216)),
    )
    yy, xx = np.mgrid[0:size, 0:size]
    inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    pixels[inside] = color
    return RasterImage(pixels), inside


def write_smear_corpus(directory, seeds, size: int = 224) -> dict[str, np.ndarray]:
    """Write one PNG per seed into ``directory``; returns stem -> truth mask."""
    truths = {}
    for seed in seeds:
        image, truth = make_smear(seed, size)
        stem = f"smear_{seed:03d}"
        save_image(image, directory / f"{stem}.png")
        truths[stem] = truth
    return truths


def solid_image(color, width: int = 4, height: int = 4) -> RasterImage:
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:, :] = color
    return RasterImage(pixels)


def write_class_tree(root, per_class: int, size: int = 8, seed: int = 5) -> Path:
    """Write ``per_class`` random small PNGs into one directory per label."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    for label in CLASS_LABELS:
        (root / label).mkdir(parents=True)
        for i in range(per_class):
            pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            save_image(RasterImage(pixels), root / label / f"img_{i:03d}.png")
    return root


def tree_digest(root) -> dict[str, str]:
    """sha256 of every PNG under ``root``, keyed by relative path."""
    digests = {}
    for p in sorted(Path(root).rglob("*.png")):
        digests[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return digests


def iou(mask_bits: np.ndarray, truth: np.ndarray) -> float:
    pred = mask_bits.astype(bool)
    union = np.logical_or(pred, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, truth).sum() / union)
