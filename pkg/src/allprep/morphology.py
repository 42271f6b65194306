"""Binary thresholding, morphology, and mask application.

Masks are {0,1} uint8 arrays.  All neighborhood operations treat pixels
outside the image as background (value 0): dilation takes the maximum
and erosion the minimum over the structuring element's footprint, with
out-of-bounds reads contributing 0 in both cases.  Thresholding is
strict (``value > T`` is foreground), and Otsu's method resolves ties
in the inter-class variance by choosing the smallest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import ClusterModel
from .errors import ShapeMismatchError
from .raster import RasterImage


@dataclass
class BinaryMask:
    """A {0,1} uint8 mask of shape (height, width).

    warnings: notes about degenerate inputs (e.g. a constant plane),
    carried so callers can surface them without failing.
    """

    bits: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ShapeMismatchError(f"mask must be 2-D, got shape {b.shape}")
        if b.dtype != np.uint8:
            b = b.astype(np.uint8)
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("mask values must be 0 or 1")
        self.bits = b

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def foreground_fraction(self) -> float:
        return float(self.bits.mean())


@dataclass(frozen=True)
class StructuringElement:
    """A symmetric flat structuring element.

    shape is "square" or "disk"; size is the odd side length of the
    bounding box.  A disk keeps offsets (s, t) with s^2 + t^2 <= r^2
    for r = size // 2, so size 3 gives the 4-connected cross.
    """

    shape: str = "square"
    size: int = 3

    def __post_init__(self) -> None:
        if self.shape not in ("square", "disk"):
            raise ValueError(f"unknown structuring element shape: {self.shape!r}")
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"size must be a positive odd integer, got {self.size}")

    def offsets(self) -> list[tuple[int, int]]:
        """Footprint offsets (ds, dt) relative to the center, row-major."""
        r = self.size // 2
        out = []
        for ds in range(-r, r + 1):
            for dt in range(-r, r + 1):
                if self.shape == "square" or ds * ds + dt * dt <= r * r:
                    out.append((ds, dt))
        return out


@dataclass(frozen=True)
class ThresholdSpec:
    """How to binarize a plane: mode "otsu" or "fixed" (with value)."""

    mode: str = "otsu"
    value: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("otsu", "fixed"):
            raise ValueError(f"unknown threshold mode: {self.mode!r}")
        if self.mode == "fixed":
            if self.value is None or not (0 <= int(self.value) <= 255):
                raise ValueError(f"fixed mode needs a value in [0, 255], got {self.value}")


def otsu_threshold(histogram: np.ndarray) -> int:
    """Otsu's threshold for a 256-bin histogram of 8-bit values.

    Maximizes the inter-class variance of the split {<= T} vs {> T}
    over T in 0..255.  The comparison is carried out in exact integer
    arithmetic (cross-multiplied rationals), so ties are well defined
    and resolve to the smallest T.  A histogram with all mass in a
    single bin has no valid split; the caller must handle that case.
    """
    hist = np.asarray(histogram)
    if hist.shape != (256,):
        raise ShapeMismatchError(f"histogram must have shape (256,), got {hist.shape}")
    counts = [int(c) for c in hist]
    total = sum(counts)
    total_sum = sum(v * c for v, c in enumerate(counts))
    if total == 0:
        raise ValueError("histogram is empty")

    best_t = 0
    # variance as a rational N/D with N = (total_sum*w0 - s0*total)^2, D = w0*(total-w0)
    best_n, best_d = 0, 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        n = (total_sum * w0 - s0 * total) ** 2
        d = w0 * w1
        # strict >: equal variance keeps the earlier (smaller) threshold
        if n * best_d > best_n * d:
            best_t, best_n, best_d = t, n, d
    return best_t


def binary_threshold(plane: np.ndarray, spec: ThresholdSpec) -> BinaryMask:
    """Binarize a uint8 plane; foreground is strictly above the threshold.

    In "otsu" mode a constant plane cannot be split, so the result is an
    all-background mask carrying a "constant-plane" warning instead of
    an arbitrary cut.
    """
    p = np.asarray(plane)
    if p.ndim != 2 or p.dtype != np.uint8:
        raise TypeError("plane must be a 2-D uint8 array")
    if spec.mode == "fixed":
        t = int(spec.value)
    else:
        hist = np.bincount(p.ravel(), minlength=256)
        if np.count_nonzero(hist) <= 1:
            return BinaryMask(np.zeros_like(p), warnings=("constant-plane",))
        t = otsu_threshold(hist)
    return BinaryMask((p > t).astype(np.uint8))


def _neighborhood(mask: BinaryMask, se: StructuringElement, take_max: bool) -> BinaryMask:
    bits = mask.bits
    h, w = bits.shape
    r = se.size // 2
    # pad with background so out-of-bounds reads contribute 0
    padded = np.zeros((h + 2 * r, w + 2 * r), dtype=np.uint8)
    padded[r : r + h, r : r + w] = bits
    combine = np.maximum if take_max else np.minimum
    out = None
    for ds, dt in se.offsets():
        window = padded[r + ds : r + ds + h, r + dt : r + dt + w]
        out = window.copy() if out is None else combine(out, window)
    return BinaryMask(out)


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Neighborhood maximum over the structuring element footprint."""
    return _neighborhood(mask, se, take_max=True)


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Neighborhood minimum over the structuring element footprint."""
    return _neighborhood(mask, se, take_max=False)


def opening(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Erosion followed by dilation; removes speckle smaller than the SE."""
    return dilate(erode(mask, se), se)


def closing(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Dilation followed by erosion; fills gaps smaller than the SE."""
    return erode(dilate(mask, se), se)


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Fill background regions not 4-connected to the image border.

    Background connectivity is grown from the border by repeated
    single-pixel propagation until a fixed point; anything the growth
    cannot reach is a hole and becomes foreground.
    """
    bits = mask.bits
    h, w = bits.shape
    background = bits == 0
    reach = np.zeros((h, w), dtype=bool)
    reach[0, :] = background[0, :]
    reach[-1, :] = background[-1, :]
    reach[:, 0] = background[:, 0]
    reach[:, -1] = background[:, -1]
    while True:
        grown = reach.copy()
        grown[1:, :] |= reach[:-1, :]
        grown[:-1, :] |= reach[1:, :]
        grown[:, 1:] |= reach[:, :-1]
        grown[:, :-1] |= reach[:, 1:]
        grown &= background
        if np.array_equal(grown, reach):
            break
        reach = grown
    return BinaryMask((~reach).astype(np.uint8), warnings=mask.warnings)


def to_u8(mask: BinaryMask) -> np.ndarray:
    """Expand a {0,1} mask to a {0,255} uint8 plane."""
    return mask.bits * np.uint8(255)


def apply_mask(image: RasterImage, mask: BinaryMask) -> RasterImage:
    """Zero out image pixels where the mask is background.

    Equivalent to a bitwise AND of each channel with the {0,255} mask.
    """
    if mask.bits.shape != image.pixels.shape[:2]:
        raise ShapeMismatchError(
            f"mask shape {mask.bits.shape} does not match image {image.pixels.shape[:2]}"
        )
    return RasterImage(image.pixels & to_u8(mask)[:, :, None])


def select_foreground(
    clustered: np.ndarray,
    model: ClusterModel,
    policy: str = "max-a",
    fixed_value: int | None = None,
):
    """Choose how to binarize a cluster-reconstructed plane.

    policy "max-a" targets the cluster with the largest centroid (the
    strongest red-green chroma in an a* plane): the threshold is set one
    level below that centroid's quantized value, so strict comparison
    keeps exactly that cluster.  If the largest centroid quantizes to 0
    a threshold cannot express the selection and the cluster membership
    itself is returned as a BinaryMask.

    policy "fixed-threshold" passes ``fixed_value`` through unchanged.
    """
    if policy == "fixed-threshold":
        if fixed_value is None:
            raise ValueError("fixed-threshold policy requires fixed_value")
        return ThresholdSpec(mode="fixed", value=int(fixed_value))
    if policy != "max-a":
        raise ValueError(f"unknown foreground policy: {policy!r}")

    target = int(np.argmax(model.centroids))
    level = int(np.clip(np.floor(model.centroids[target] + 0.5), 0, 255))
    if level == 0:
        h, w = np.asarray(clustered).shape
        bits = (model.assignments.reshape(h, w) == target).astype(np.uint8)
        return BinaryMask(bits)
    return ThresholdSpec(mode="fixed", value=level - 1)
