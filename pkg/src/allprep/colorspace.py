"""RGB to CIE L*a*b* conversion with 8-bit encoding.

The conversion assumes sRGB primaries with the D65 reference white and
follows the standard path: gamma-decode sRGB, linear transform to XYZ,
then the CIE f() compression.  Results are packed into uint8 planes the
way 8-bit image libraries conventionally do: L* scaled by 255/100, a*
and b* offset by +128, all rounded half up and clipped to [0, 255].
The neutral axis (r = g = b) therefore encodes to a = b = 128 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import RasterImage

# sRGB -> XYZ (D65, 2 degree observer), IEC 61966-2-1 primaries
_M_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
_WHITE = np.array([0.95047, 1.0, 1.08883], dtype=np.float64)

# CIE junction constants as exact rationals
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


@dataclass
class LabImage:
    """8-bit encoded L*a*b* planes, each of shape (height, width)."""

    l_plane: np.ndarray
    a_plane: np.ndarray
    b_plane: np.ndarray

    def __post_init__(self) -> None:
        for name in ("l_plane", "a_plane", "b_plane"):
            plane = np.asarray(getattr(self, name))
            if plane.dtype != np.uint8 or plane.ndim != 2:
                raise TypeError(f"{name} must be a 2-D uint8 array")
            setattr(self, name, plane)
        if not (self.l_plane.shape == self.a_plane.shape == self.b_plane.shape):
            raise ValueError("L, a, b planes must share one shape")

    @property
    def height(self) -> int:
        return self.l_plane.shape[0]

    @property
    def width(self) -> int:
        return self.l_plane.shape[1]


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)


def rgb_to_lab(image: RasterImage) -> LabImage:
    """Convert an RGB image to 8-bit encoded L*a*b* planes."""
    rgb = image.pixels.astype(np.float64) / 255.0
    lin = _srgb_to_linear(rgb)
    xyz = lin @ _M_RGB2XYZ.T
    t = xyz / _WHITE

    f = np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]

    l_star = 116.0 * fy - 16.0
    a_star = 500.0 * (fx - fy)
    b_star = 200.0 * (fy - fz)

    def encode(values: np.ndarray) -> np.ndarray:
        return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)

    return LabImage(
        l_plane=encode(l_star * 255.0 / 100.0),
        a_plane=encode(a_star + 128.0),
        b_plane=encode(b_star + 128.0),
    )


def split_channels(lab: LabImage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the (L, a, b) planes as independent arrays."""
    return lab.l_plane.copy(), lab.a_plane.copy(), lab.b_plane.copy()
