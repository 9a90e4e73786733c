"""Rotation, border-free cropping and resizing of raster images.

Images are float arrays of shape ``(H, W)`` or ``(H, W, C)`` with values in
``[0, 1]``. Rotation angles are in degrees and counterclockwise as the image
is displayed (row index growing downward).

Continuous pixel coordinates put pixel ``(r, c)`` at its center, so a
``W``-pixel-wide image covers ``x`` in ``[-0.5, W - 0.5]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .circmath import DegenerateInputError, normalize

_EPS = 1e-9


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned rectangle in the rotated-canvas frame (pixels)."""

    center_x: float
    center_y: float
    crop_width: float
    crop_height: float

    @property
    def area(self) -> float:
        return self.crop_width * self.crop_height


def validate_image(img) -> np.ndarray:
    """Return ``img`` as a float64 array after checking shape and range."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (1, 3)):
        raise ValueError(f"expected (H, W) or (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DegenerateInputError("image has zero size")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must be finite and within [0, 1]")
    return arr


def _canonical(theta: float) -> float:
    # rounding makes theta and theta + 360k resample identically
    return normalize(round(normalize(theta), 9))


def _quarter_turns(theta: float) -> int | None:
    q = theta / 90.0
    k = round(q)
    if abs(q - k) < 1e-12:
        return k % 4
    return None


def rotated_canvas_shape(width: int, height: int, theta: float) -> tuple[int, int]:
    """``(width, height)`` of the bounding box of a rotated ``width x height`` image."""
    r = math.radians(normalize(theta))
    c, s = abs(math.cos(r)), abs(math.sin(r))
    return (
        max(1, math.ceil(width * c + height * s - 1e-3)),
        max(1, math.ceil(width * s + height * c - 1e-3)),
    )


def _sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``img`` at fractional ``(rows, cols)``."""
    coords = np.stack([rows.ravel(), cols.ravel()])
    if img.ndim == 2:
        out = ndimage.map_coordinates(img, coords, order=1, mode="nearest")
        return out.reshape(rows.shape)
    chans = [ndimage.map_coordinates(img[..., k], coords, order=1, mode="nearest") for k in range(img.shape[2])]
    return np.stack(chans, axis=-1).reshape(rows.shape + (img.shape[2],))


def _rotated_window(src: np.ndarray, theta: float, canvas_w: int, canvas_h: int, rows, cols) -> np.ndarray:
    """Canvas pixels ``rows x cols`` of ``src`` rotated by ``theta`` (not a quarter turn)."""
    h, w = src.shape[:2]
    r = math.radians(theta)
    c, s = math.cos(r), math.sin(r)
    dy = np.asarray(rows, dtype=np.float64)[:, None] - (canvas_h - 1) / 2.0
    dx = np.asarray(cols, dtype=np.float64)[None, :] - (canvas_w - 1) / 2.0
    # inverse of the displayed counterclockwise rotation (y axis points down)
    sx = c * dx - s * dy + (w - 1) / 2.0
    sy = s * dx + c * dy + (h - 1) / 2.0
    inside = (sx >= -0.5 - _EPS) & (sx <= w - 0.5 + _EPS) & (sy >= -0.5 - _EPS) & (sy <= h - 0.5 + _EPS)
    out = _sample(src, sy, sx)
    if out.ndim == 3:
        out[~inside] = 0.0
    else:
        out = np.where(inside, out, 0.0)
    return np.clip(out, 0.0, 1.0)


def rotate_image(img, theta: float) -> np.ndarray:
    """Rotate ``img`` counterclockwise by ``theta`` degrees.

    The output canvas is the bounding box of the rotated image. Canvas
    pixels whose preimage falls outside the source are filled with 0.
    Multiples of 90 degrees are handled by exact pixel permutation.
    """
    src = validate_image(img)
    theta = _canonical(theta)
    k = _quarter_turns(theta)
    if k is not None:
        return np.rot90(src, k).copy()
    h, w = src.shape[:2]
    out_w, out_h = rotated_canvas_shape(w, h, theta)
    return _rotated_window(src, theta, out_w, out_h, np.arange(out_h), np.arange(out_w))


def inscribed_rect_size(width: float, height: float, theta: float) -> tuple[float, float]:
    """Sides of the largest axis-aligned rectangle inside a rotated ``width x height`` rectangle."""
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    r = math.radians(normalize(theta))
    s, c = abs(math.sin(r)), abs(math.cos(r))
    width_is_longer = width >= height
    side_long, side_short = (width, height) if width_is_longer else (height, width)
    if side_short <= 2.0 * s * c * side_long or abs(s - c) < 1e-12:
        # two opposite corners touch the long sides
        x = 0.5 * side_short
        return (x / s, x / c) if width_is_longer else (x / c, x / s)
    cos_2a = c * c - s * s
    return (width * c - height * s) / cos_2a, (height * c - width * s) / cos_2a


def largest_inscribed_rect(width: int, height: int, theta: float) -> CropRect:
    """Largest border-free crop of a ``width x height`` image rotated by ``theta``.

    The rectangle is centered on the canvas produced by :func:`rotate_image`.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    cw, ch = inscribed_rect_size(width, height, theta)
    out_w, out_h = rotated_canvas_shape(width, height, theta)
    return CropRect((out_w - 1) / 2.0, (out_h - 1) / 2.0, cw, ch)


def resize_bilinear(img, out_h: int, out_w: int | None = None) -> np.ndarray:
    """Bilinear resize with pixel-center alignment."""
    src = np.asarray(img, dtype=np.float64)
    out_w = out_h if out_w is None else out_w
    h, w = src.shape[:2]
    rows = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    cols = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return _sample(src, rr, cc)


def rotate_and_crop(img, theta: float, out_size: int) -> np.ndarray:
    """Rotate, crop away every fill pixel, and resize to ``out_size x out_size``.

    The crop is the central square inside the largest inscribed rectangle.
    For angles that are not multiples of 90 degrees the rectangle is computed
    for the source shrunk by ``sqrt(2)`` pixels per side, so that bilinear
    resampling of the canvas never touches a fill pixel.
    """
    if out_size <= 0:
        raise ValueError("out_size must be positive")
    src = validate_image(img)
    theta = _canonical(theta)
    h, w = src.shape[:2]
    quarter = _quarter_turns(theta)

    margin = 0.0 if quarter is not None else math.sqrt(2.0)
    if min(w, h) - 2 * margin <= 0:
        raise DegenerateInputError("image too small to crop")
    rect_w, rect_h = inscribed_rect_size(w - 2 * margin, h - 2 * margin, theta)
    side = min(rect_w, rect_h)
    if side < 2.0:
        raise DegenerateInputError(f"crop of {side:.2f} pixels is too small")

    canvas_w, canvas_h = rotated_canvas_shape(w, h, theta)
    offs = (np.arange(out_size) + 0.5) * (side / out_size) - side / 2.0
    rows = (canvas_h - 1) / 2.0 + offs
    cols = (canvas_w - 1) / 2.0 + offs
    if quarter is not None:
        canvas, r0, c0 = np.rot90(src, quarter), 0, 0
    else:
        # only the canvas pixels that the resize reads; identical to cropping the full canvas
        r0, r1 = max(0, math.floor(rows[0])), min(canvas_h - 1, math.ceil(rows[-1]))
        c0, c1 = max(0, math.floor(cols[0])), min(canvas_w - 1, math.ceil(cols[-1]))
        canvas = _rotated_window(src, theta, canvas_w, canvas_h, np.arange(r0, r1 + 1), np.arange(c0, c1 + 1))
    rr, cc = np.meshgrid(rows - r0, cols - c0, indexing="ij")
    return np.clip(_sample(canvas, rr, cc), 0.0, 1.0)
