"""Deterministic image preprocessing and evaluation toolkit for stained smear images.

The package covers the full path from raw smear photographs to
classifier-ready tensors and evaluation reports: raster I/O and resizing,
Lab color conversion, one-dimensional k-means segmentation, binary
morphology, dataset manifest management with stratified splits and
augmentation, reference neural building blocks (attention, focal loss),
and multiclass metrics.
"""

__version__ = "0.1.0"

from .raster import RasterImage, load_image, resize_bilinear, save_image
from .colorspace import LabImage, rgb_to_lab, split_channels
from .cluster import ClusterModel, kmeans_1d, reconstruct_clustered
from .morphology import (
    BinaryMask,
    StructuringElement,
    ThresholdSpec,
    apply_mask,
    binary_threshold,
    closing,
    dilate,
    erode,
    fill_holes,
    opening,
    otsu_threshold,
    select_foreground,
)
from .pipeline import PipelineConfig, PreprocessResult, preprocess_image

__all__ = [
    "RasterImage",
    "load_image",
    "save_image",
    "resize_bilinear",
    "LabImage",
    "rgb_to_lab",
    "split_channels",
    "ClusterModel",
    "kmeans_1d",
    "reconstruct_clustered",
    "BinaryMask",
    "StructuringElement",
    "ThresholdSpec",
    "binary_threshold",
    "otsu_threshold",
    "dilate",
    "erode",
    "opening",
    "closing",
    "fill_holes",
    "apply_mask",
    "select_foreground",
    "PipelineConfig",
    "PreprocessResult",
    "preprocess_image",
    "__version__",
]
