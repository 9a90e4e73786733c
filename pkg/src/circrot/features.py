"""Fixed feature extractors feeding the trainable head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("raw_pixels", "grad_orientation_histogram")


@dataclass(frozen=True)
class FeatureExtractor:
    """Deterministic image-to-vector map.

    Parameters
    ----------
    kind : {"raw_pixels", "grad_orientation_histogram"}
    image_size : int
        Expected (square) input side in pixels.
    cells : int
        The histogram variant splits the image into ``cells x cells`` blocks.
    n_bins : int
        Orientation bins per block, covering the full 360 degrees; votes are
        magnitude-weighted and split linearly between the two nearest bins.
    """

    kind: str = "grad_orientation_histogram"
    image_size: int = 64
    cells: int = 2
    n_bins: int = 36

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}; expected one of {KINDS}")
        if self.image_size <= 0 or self.cells <= 0 or self.n_bins <= 1:
            raise ValueError("image_size, cells and n_bins must be positive (n_bins >= 2)")
        if self.kind == "grad_orientation_histogram" and self.image_size % self.cells:
            raise ValueError("image_size must be divisible by cells")

    @property
    def out_dim(self) -> int:
        if self.kind == "raw_pixels":
            return self.image_size * self.image_size
        return self.cells * self.cells * self.n_bins

    def to_dict(self) -> dict:
        return {"kind": self.kind, "image_size": self.image_size, "cells": self.cells, "n_bins": self.n_bins}


def _gray(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return arr


def orientation_histograms(gray: np.ndarray, cells: int, n_bins: int) -> np.ndarray:
    """Per-cell gradient orientation histograms, shape ``(cells, cells, n_bins)``.

    Orientation is measured counterclockwise from the +x axis with y pointing
    up; bin ``k`` is centered on ``k * 360 / n_bins`` degrees.
    """
    h, w = gray.shape
    d_row, d_col = np.gradient(gray)
    mag = np.hypot(d_col, d_row)
    ang = np.mod(np.degrees(np.arctan2(-d_row, d_col)), 360.0)
    pos = ang / (360.0 / n_bins)
    lo = np.floor(pos).astype(np.intp)
    frac = pos - lo
    lo %= n_bins
    hi = (lo + 1) % n_bins

    cell_r = (np.arange(h) * cells // h)[:, None]
    cell_c = (np.arange(w) * cells // w)[None, :]
    base = (cell_r * cells + cell_c) * n_bins
    size = cells * cells * n_bins
    hist = np.bincount((base + lo).ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((base + hi).ravel(), weights=(mag * frac).ravel(), minlength=size)
    return hist.reshape(cells, cells, n_bins)


def extract_features(fx: FeatureExtractor, img) -> np.ndarray:
    gray = _gray(img)
    if gray.shape != (fx.image_size, fx.image_size):
        raise ValueError(f"expected a {fx.image_size}x{fx.image_size} image, got {gray.shape}")
    if fx.kind == "raw_pixels":
        v = gray.ravel()
        return v - v.mean()
    hist = orientation_histograms(gray, fx.cells, fx.n_bins)
    norms = np.linalg.norm(hist, axis=2, keepdims=True)
    hist = np.divide(hist, norms, out=np.zeros_like(hist), where=norms > 1e-12)
    return hist.ravel()


def extract_batch(fx: FeatureExtractor, images) -> np.ndarray:
    return np.stack([extract_features(fx, im) for im in images])
