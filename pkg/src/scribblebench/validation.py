"""Input checks shared by the public entry points."""
from __future__ import annotations

import numpy as np

from .volume_io import LabelVolume


def check_mask(m, name: str = "mask") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {m.shape}")
    if m.dtype != bool:
        if not np.isin(m, (0, 1)).all():
            raise ValueError(f"{name} must be boolean or 0/1 valued")
        m = m.astype(bool)
    return m


def check_volume(v, name: str = "volume") -> LabelVolume:
    if not isinstance(v, LabelVolume):
        raise TypeError(f"{name} must be a LabelVolume, got {type(v).__name__}")
    return v


def check_same_grid(a: LabelVolume, b: LabelVolume, what: str = "volumes") -> None:
    if a.dims != b.dims:
        raise ValueError(f"{what} differ in shape: {a.dims} vs {b.dims}")


def check_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"logits must have shape (C, N), got {z.shape}")
    if z.shape[0] < 2 or z.shape[1] < 1:
        raise ValueError(f"need at least 2 classes and 1 voxel, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def check_target(labels, n_classes: int, n_voxels: int, ignore_index: int) -> np.ndarray:
    t = np.asarray(labels)
    if t.shape != (n_voxels,):
        raise ValueError(f"target must have shape ({n_voxels},), got {t.shape}")
    if not np.issubdtype(t.dtype, np.integer):
        raise ValueError("target labels must be integers")
    labeled = t != ignore_index
    bad = labeled & ((t < 0) | (t >= n_classes))
    if bad.any():
        raise ValueError(f"label {int(t[bad][0])} out of range for {n_classes} classes")
    return t.astype(np.int64)
