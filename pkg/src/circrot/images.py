"""Image file I/O.

Two formats:

* PNG, 8-bit, converted to and from floats in ``[0, 1]``.
* A lossless raw float format: one ASCII header line ``"<width> <height>
  <channels>\\n"`` followed by row-major little-endian float32 values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import validate_image


def write_png(path, img) -> None:
    arr = validate_image(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    u8 = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(u8).save(path, format="PNG", optimize=False)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if "A" in im.mode or im.mode in ("P", "CMYK") else "L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_raw(path, img) -> None:
    arr = validate_image(img)
    h, w = arr.shape[:2]
    c = 1 if arr.ndim == 2 else arr.shape[2]
    with open(path, "wb") as fh:
        fh.write(f"{w} {h} {c}\n".encode("ascii"))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    try:
        w, h, c = (int(v) for v in data[:nl].split())
    except ValueError as exc:
        raise ValueError(f"{path}: malformed raw image header") from exc
    body = np.frombuffer(data, dtype="<f4", offset=nl + 1)
    if body.size != w * h * c:
        raise ValueError(f"{path}: expected {w * h * c} values, found {body.size}")
    arr = body.astype(np.float64).reshape(h, w, c)
    return arr[..., 0] if c == 1 else arr


def read_image(path) -> np.ndarray:
    """Read PNG or raw float image based on the file extension (``.raw`` / ``.pfr``)."""
    if Path(path).suffix.lower() in (".raw", ".pfr"):
        return read_raw(path)
    return read_png(path)
