"""Render a slice of dense labels with its scribbles on top, as RGB.

Dense classes are drawn as translucent fills over a gray background and
scribbles in the full palette color of their class; ignore voxels are left
untouched. Image rows follow the first remaining axis of the slice.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

BACKGROUND_GRAY = (96, 96, 96)
FILL_ALPHA = 0.35

# 12 well-separated colors; class k uses entry k % 12
PALETTE = np.array(
    [
        (255, 255, 255),
        (230, 25, 75),
        (60, 180, 75),
        (255, 225, 25),
        (0, 130, 200),
        (245, 130, 48),
        (145, 30, 180),
        (70, 240, 240),
        (240, 50, 230),
        (210, 245, 60),
        (0, 128, 128),
        (170, 110, 40),
    ],
    dtype=np.uint8,
)


def class_color(c: int) -> np.ndarray:
    return PALETTE[int(c) % len(PALETTE)]


def render_dense(dense: np.ndarray) -> np.ndarray:
    dense = np.asarray(dense)
    gray = np.array(BACKGROUND_GRAY, dtype=np.float64)
    img = np.empty(dense.shape + (3,), dtype=np.uint8)
    img[:] = BACKGROUND_GRAY
    for c in np.unique(dense):
        if c == 0:
            continue
        blended = (1 - FILL_ALPHA) * gray + FILL_ALPHA * class_color(c)
        img[dense == c] = np.rint(blended).astype(np.uint8)
    return img


def render_overlay(dense: np.ndarray, scribbles: np.ndarray, ignore_label: int) -> np.ndarray:
    dense, scribbles = np.asarray(dense), np.asarray(scribbles)
    if dense.shape != scribbles.shape:
        raise ValueError(f"slice shapes differ: {dense.shape} vs {scribbles.shape}")
    img = render_dense(dense)
    marked = scribbles != ignore_label
    img[marked] = PALETTE[scribbles[marked].astype(np.int64) % len(PALETTE)]
    return img


def save_png(img: np.ndarray, path) -> None:
    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8)).save(path, format="PNG")
