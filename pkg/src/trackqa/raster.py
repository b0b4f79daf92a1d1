"""Grayscale image type with sub-pixel sampling, gradients and Gaussian blur."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d


class ImageTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class GrayImage:
    """Immutable 2-D grayscale raster with intensities in [0, 1]."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("expected a non-empty 2-D array")
        if not np.all(np.isfinite(a)):
            raise ValueError("intensities must be finite")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_bytes(cls, raw: np.ndarray) -> "GrayImage":
        """Build from an 8-bit array, scaling to [0, 1]."""
        return cls(np.asarray(raw, dtype=np.float64) / 255.0)


def luma(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (h, w, 3) array; same scale as the input."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def sample_bilinear(img: GrayImage, x, y):
    """Bilinearly interpolated intensity at (x, y); coordinates are clamped
    to the image border, so the function is total.

    Accepts scalars or arrays (broadcast together).
    """
    a = img.data
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, img.width - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, img.height - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    fx = x - x0
    fy = y - y0
    top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return float(out) if out.ndim == 0 else out


def gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """(gx, gy): central differences in the interior, one-sided at borders."""
    if img.width < 3 or img.height < 3:
        raise ImageTooSmallError("gradients need at least a 3x3 image")
    gy, gx = np.gradient(img.data)
    return gx, gy


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian truncated at radius ceil(3*sigma)."""
    r = math.ceil(3.0 * sigma)
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur. The kernel is renormalized where it hangs
    over the border, so constants are preserved exactly.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return img
    k = gaussian_kernel(sigma)
    num = convolve1d(img.data, k, axis=0, mode="constant", cval=0.0)
    num = convolve1d(num, k, axis=1, mode="constant", cval=0.0)
    ones = np.ones_like(img.data)
    den = convolve1d(ones, k, axis=0, mode="constant", cval=0.0)
    den = convolve1d(den, k, axis=1, mode="constant", cval=0.0)
    out = num / den
    return GrayImage(np.clip(out, 0.0, 1.0))


def downsample2(img: GrayImage) -> GrayImage:
    """Factor-2 downsampling by 2x2 box averaging (odd trailing row/col dropped)."""
    a = img.data
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return GrayImage((a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2]) * 0.25)
