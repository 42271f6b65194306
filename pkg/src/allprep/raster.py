"""Raster image I/O and resampling.

Images are carried as uint8 RGB arrays in (height, width, 3) layout.
Decoding and encoding of JPG/PNG containers is delegated to Pillow;
resampling is implemented here so its arithmetic is fixed and
reproducible across library versions.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImageError, ShapeMismatchError, UnsupportedFormatError, ZeroTargetError

_READ_SUFFIXES = {".jpg", ".jpeg", ".png"}


@dataclass
class RasterImage:
    """An 8-bit RGB image.

    pixels: uint8 array of shape (height, width, 3), channel order RGB.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.pixels)
        if p.dtype != np.uint8:
            raise TypeError(f"pixels must be uint8, got {p.dtype}")
        if p.ndim != 3 or p.shape[2] != 3:
            raise ShapeMismatchError(f"pixels must have shape (h, w, 3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeMismatchError("image must have at least one row and one column")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_image(path: str | os.PathLike) -> RasterImage:
    """Decode a JPG or PNG file into a canonical RGB image.

    Grayscale and palette images are expanded to RGB; any alpha channel
    is dropped.

    Raises FileNotFoundError for a missing path, UnsupportedFormatError
    for an extension outside {jpg, jpeg, png}, and CorruptImageError
    when the bytes cannot be decoded as the format the extension claims.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if p.suffix.lower() not in _READ_SUFFIXES:
        raise UnsupportedFormatError(f"unsupported image format: {p.suffix!r} ({p})")
    try:
        with Image.open(p) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"unreadable image header: {p}") from exc
    except (OSError, SyntaxError) as exc:
        # Pillow reports truncated/garbled payloads as OSError or SyntaxError.
        raise CorruptImageError(f"undecodable image data: {p}") from exc
    return RasterImage(arr)


def save_image(image, path: str | os.PathLike) -> None:
    """Write an image or a binary mask to a PNG file.

    Accepts a RasterImage (saved as RGB) or an object with a ``bits``
    attribute holding a 2-D {0,1} array (saved as 8-bit grayscale with
    foreground mapped to 255).  Only the .png extension is accepted;
    filesystem failures propagate as OSError.
    """
    p = Path(path)
    if p.suffix.lower() != ".png":
        raise UnsupportedFormatError(f"output must be .png, got {p.suffix!r} ({p})")
    if isinstance(image, RasterImage):
        pil = Image.fromarray(image.pixels, mode="RGB")
    elif hasattr(image, "bits"):
        bits = np.asarray(image.bits)
        pil = Image.fromarray((bits.astype(np.uint8) * 255), mode="L")
    elif isinstance(image, np.ndarray) and image.ndim == 2 and image.dtype == np.uint8:
        pil = Image.fromarray(image, mode="L")
    else:
        raise TypeError(f"cannot save object of type {type(image).__name__}")
    pil.save(p, format="PNG")


def resize_bilinear(image: RasterImage, target: tuple[int, int] = (224, 224)) -> RasterImage:
    """Resize with bilinear interpolation to target (width, height).

    Sample positions use the half-pixel-center convention
    ``src = (dst + 0.5) * (src_size / dst_size) - 0.5`` with coordinates
    clamped to the source grid, so edge pixels replicate rather than
    wrap.  Interpolation runs in float64 and the result is rounded half
    up to uint8.  Resizing to the source size reproduces the input
    byte for byte.
    """
    tw, th = int(target[0]), int(target[1])
    if tw <= 0 or th <= 0:
        raise ZeroTargetError(f"target must be positive in both dimensions, got {(tw, th)}")

    src = image.pixels
    sh, sw = src.shape[0], src.shape[1]
    if (sw, sh) == (tw, th):
        return RasterImage(src.copy())

    out = np.empty((th, tw, 3), dtype=np.float64)
    ys = (np.arange(th, dtype=np.float64) + 0.5) * (sh / th) - 0.5
    xs = (np.arange(tw, dtype=np.float64) + 0.5) * (sw / tw) - 0.5
    ys = np.clip(ys, 0.0, sh - 1.0)
    xs = np.clip(xs, 0.0, sw - 1.0)

    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, sh - 1)
    x1 = np.minimum(x0 + 1, sw - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]

    f = src.astype(np.float64)
    top = f[y0][:, x0] * (1.0 - wx) + f[y0][:, x1] * wx
    bot = f[y1][:, x0] * (1.0 - wx) + f[y1][:, x1] * wx
    out = top * (1.0 - wy) + bot * wy

    # round half up, matching the quantization used elsewhere in the package
    quant = np.floor(out + 0.5)
    return RasterImage(np.clip(quant, 0, 255).astype(np.uint8))
