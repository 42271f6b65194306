"""The end-to-end smear preprocessing pipeline.

One image flows through: resize → Lab conversion → a* plane extraction
→ 1-D k-means → cluster-value reconstruction → foreground selection →
binary threshold → hole filling → opening → closing → mask application.
The a* axis separates the magenta-stained nucleus from pale background,
so the cluster with the largest a* centroid is taken as foreground by
default.

Every stage is deterministic given the config seed, and each image is
processed independently, so results do not depend on worker count or
scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import ClusterModel, kmeans_1d, reconstruct_clustered
from .colorspace import rgb_to_lab, split_channels
from .morphology import (
    BinaryMask,
    StructuringElement,
    ThresholdSpec,
    apply_mask,
    binary_threshold,
    closing,
    fill_holes,
    opening,
    select_foreground,
    to_u8,
)
from .raster import RasterImage, resize_bilinear

MORPH_OPS = ("fill", "open", "close")


@dataclass(frozen=True)
class PipelineConfig:
    """Parameters of the preprocessing pipeline.

    target: output (width, height).
    k: number of a* clusters.
    foreground: "max-a" (cluster with the largest a* centroid) or
        "fixed-threshold" (binarize with ``threshold`` directly).
    threshold: "otsu" or an integer 0..255; only used when
        foreground="fixed-threshold".
    se_shape/se_size: structuring element for opening and closing.
    morph_order: sequence of cleanup ops out of "fill", "open",
        "close", each at most once, applied left to right.
    seed: k-means seeding.
    """

    target: tuple[int, int] = (224, 224)
    k: int = 7
    foreground: str = "max-a"
    threshold: str | int = "otsu"
    se_shape: str = "square"
    se_size: int = 3
    morph_order: tuple[str, ...] = ("fill", "open", "close")
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.foreground not in ("max-a", "fixed-threshold"):
            raise ValueError(f"unknown foreground policy: {self.foreground!r}")
        if isinstance(self.threshold, str) and self.threshold != "otsu":
            raise ValueError(f"threshold must be 'otsu' or an integer, got {self.threshold!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        for op in self.morph_order:
            if op not in MORPH_OPS:
                raise ValueError(f"unknown morphology op: {op!r}")
        if len(set(self.morph_order)) != len(self.morph_order):
            raise ValueError("morph_order must not repeat an op")
        # constructing the SE validates shape and size
        StructuringElement(self.se_shape, self.se_size)


@dataclass
class PreprocessResult:
    """All intermediate products of one pipeline run, for inspection.

    morph_stages holds (op name, mask after that op) in execution
    order; ``mask`` is the final cleaned mask actually applied.
    """

    resized: RasterImage
    a_plane: np.ndarray
    model: ClusterModel | None
    clustered: np.ndarray
    raw_mask: BinaryMask
    morph_stages: tuple[tuple[str, BinaryMask], ...]
    mask: BinaryMask
    masked: RasterImage
    warnings: tuple[str, ...] = ()

    @property
    def mask_u8(self) -> np.ndarray:
        return to_u8(self.mask)

    def stage(self, op: str) -> BinaryMask | None:
        """Mask as it stood after the named op, or None if the op did not run."""
        for name, mask in self.morph_stages:
            if name == op:
                return mask
        return None


def preprocess_image(image: RasterImage, cfg: PipelineConfig = PipelineConfig()) -> PreprocessResult:
    """Run the full pipeline on one image.

    A constant a* plane carries no chroma signal to segment; that case
    short-circuits to an all-background mask with a warning instead of
    thresholding noise.
    """
    warnings: list[str] = []
    resized = resize_bilinear(image, cfg.target)
    lab = rgb_to_lab(resized)
    _, a_plane, _ = split_channels(lab)
    h, w = a_plane.shape

    if int(a_plane.min()) == int(a_plane.max()):
        warnings.append("constant a* plane; emitting all-background mask")
        empty = BinaryMask(np.zeros((h, w), dtype=np.uint8))
        return PreprocessResult(
            resized=resized,
            a_plane=a_plane,
            model=None,
            clustered=a_plane.copy(),
            raw_mask=empty,
            morph_stages=(),
            mask=empty,
            masked=apply_mask(resized, empty),
            warnings=tuple(warnings),
        )

    model = kmeans_1d(
        a_plane.ravel(), cfg.k, seed=cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol
    )
    clustered = reconstruct_clustered(model, w, h)

    if cfg.foreground == "max-a":
        selection = select_foreground(clustered, model, policy="max-a")
    elif cfg.threshold == "otsu":
        selection = ThresholdSpec(mode="otsu")
    else:
        selection = ThresholdSpec(mode="fixed", value=int(cfg.threshold))

    if isinstance(selection, BinaryMask):
        raw = selection
    else:
        raw = binary_threshold(clustered, selection)
    warnings.extend(raw.warnings)

    se = StructuringElement(cfg.se_shape, cfg.se_size)
    mask = raw
    stages: list[tuple[str, BinaryMask]] = []
    for op in cfg.morph_order:
        if op == "fill":
            mask = fill_holes(mask)
        elif op == "open":
            mask = opening(mask, se)
        else:
            mask = closing(mask, se)
        stages.append((op, mask))

    masked = apply_mask(resized, mask)
    return PreprocessResult(
        resized=resized,
        a_plane=a_plane,
        model=model,
        clustered=clustered,
        raw_mask=raw,
        morph_stages=tuple(stages),
        mask=mask,
        masked=masked,
        warnings=tuple(warnings),
    )
