"""Synthesize sparse scribble annotations from dense label volumes.

For every slice along the configured axis and every class present on it,
two scribbles are drawn: an interior stroke (a rasterized NURBS through
random points of the eroded class region) and a border stroke (a piece of
the class contour pushed slightly inward by a smooth random offset). All
scribble pixels are clipped to their class, so the result is a subset of
the dense labels.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import geometry, nurbs
from .validation import check_mask, check_volume
from .volume_io import LabelSlice, LabelVolume, default_ignore_label, slice_extract

INTERIOR = 0
BORDER = 1


@dataclass
class ScribbleConfig:
    slice_axis: int = 2
    erosion_radius: float = 2.0
    erosion_fallbacks: tuple[float, ...] = (2.0, 1.0, 0.0)
    control_points: tuple[int, int] = (4, 8)
    weight_range: tuple[float, float] = (0.5, 2.0)
    samples_per_curve: int = 128
    arc_fraction: tuple[float, float] = (0.1, 0.25)
    offset_scale: float = 1.5
    min_component_pixels: int = 10
    include_background: bool = True
    master_seed: int = 0
    ignore_label: int | None = None

    def __post_init__(self):
        self.erosion_fallbacks = tuple(float(r) for r in self.erosion_fallbacks)
        self.control_points = tuple(int(k) for k in self.control_points)
        self.weight_range = tuple(float(w) for w in self.weight_range)
        self.arc_fraction = tuple(float(f) for f in self.arc_fraction)
        self.validate()

    def validate(self) -> None:
        if self.slice_axis not in (0, 1, 2):
            raise ValueError(f"slice_axis must be 0, 1 or 2, got {self.slice_axis}")
        if self.erosion_radius < 0:
            raise ValueError("erosion_radius must be non-negative")
        fb = self.erosion_fallbacks
        if not fb or fb[-1] != 0 or any(a <= b for a, b in zip(fb, fb[1:])):
            raise ValueError("erosion_fallbacks must be strictly descending and end in 0")
        lo, hi = self.control_points
        if not 2 <= lo <= hi:
            raise ValueError("control_points must be a range with 2 <= low <= high")
        wl, wh = self.weight_range
        if not 0 < wl <= wh:
            raise ValueError("weight_range must be a positive interval")
        if self.samples_per_curve < 2:
            raise ValueError("samples_per_curve must be at least 2")
        fl, fh = self.arc_fraction
        if not 0 < fl <= fh <= 1:
            raise ValueError("arc_fraction must lie within (0, 1]")
        if self.offset_scale < 0:
            raise ValueError("offset_scale must be non-negative")
        if self.min_component_pixels < 1:
            raise ValueError("min_component_pixels must be at least 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.ignore_label is not None and self.ignore_label < 0:
            raise ValueError("ignore_label must be non-negative")

    def erosion_radii(self) -> list[float]:
        """Radii tried in order: the configured radius, then smaller fallbacks."""
        return [self.erosion_radius] + [r for r in self.erosion_fallbacks if r < self.erosion_radius]

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, values: dict) -> "ScribbleConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values)

    def replace(self, **overrides) -> "ScribbleConfig":
        return self.from_dict({**self.to_dict(), **overrides})

    @classmethod
    def load(cls, path) -> "ScribbleConfig":
        with open(path) as fh:
            values = yaml.safe_load(fh) or {}
        if not isinstance(values, dict):
            raise ValueError(f"{path}: config must be a key-value mapping")
        return cls.from_dict(values)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _stable_id(volume_id: str) -> int:
    return int.from_bytes(hashlib.sha256(volume_id.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class ScribbleRng:
    """Family of independent random streams keyed by (volume, slice, class, scribble type).

    Each stream is a Philox generator seeded from the master seed and the
    key, so results never depend on the order slices are processed in.
    """

    master_seed: int
    volume_id: str = ""
    _vol_key: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_vol_key", _stable_id(self.volume_id))

    def stream(self, slice_index: int, class_id: int, kind: int) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(self._vol_key, int(slice_index), int(class_id), int(kind)),
        )
        return np.random.Generator(np.random.Philox(seq))


def _eligible_components(mask: np.ndarray, min_pixels: int):
    labels, sizes = geometry.connected_components(mask, connectivity=8)
    keep = np.nonzero(sizes >= min_pixels)[0] + 1
    return labels, sizes, keep


def _pick_weighted(rng: np.random.Generator, sizes: np.ndarray) -> int:
    return int(rng.choice(len(sizes), p=sizes / sizes.sum()))


def order_nearest_neighbor(points: np.ndarray, start: int) -> np.ndarray:
    """Greedy nearest-neighbour chaining; ties go to the lower index."""
    remaining = list(range(len(points)))
    order = [remaining.pop(start)]
    while remaining:
        last = points[order[-1]]
        d = [float(np.sum((points[i] - last) ** 2)) for i in remaining]
        order.append(remaining.pop(int(np.argmin(d))))
    return points[order]


def _interior(class_mask, cfg: ScribbleConfig, rng: np.random.Generator):
    """Interior stroke plus the erosion radius that produced its support (None if empty)."""
    mask = check_mask(class_mask, "class_mask")
    empty = np.zeros(mask.shape, dtype=bool)
    labels, _, keep = _eligible_components(mask, cfg.min_component_pixels)
    if len(keep) == 0:
        return empty, None
    support = np.isin(labels, keep)

    for radius in cfg.erosion_radii():
        interior = geometry.erode(support, radius)
        if interior.any():
            break
    else:  # unreachable: radius 0 keeps the support
        return empty, None

    comp_labels, comp_sizes = geometry.connected_components(interior, connectivity=8)
    chosen = _pick_weighted(rng, comp_sizes) + 1
    pixels = np.argwhere(comp_labels == chosen)

    lo, hi = cfg.control_points
    k = int(rng.integers(lo, hi + 1))
    picks = rng.choice(len(pixels), size=k, replace=len(pixels) < k)
    ctrl = order_nearest_neighbor(pixels[picks].astype(np.float64), int(rng.integers(k)))
    weights = rng.uniform(*cfg.weight_range, size=k)
    curve = nurbs.make_clamped(ctrl, weights, degree=min(3, k - 1))
    stroke = geometry.rasterize_polyline(nurbs.sample(curve, cfg.samples_per_curve), mask.shape)
    return stroke & mask, radius


def interior_scribble(class_mask, cfg: ScribbleConfig, rng: np.random.Generator) -> np.ndarray:
    """NURBS stroke through random points of the eroded class region, clipped to the class."""
    return _interior(class_mask, cfg, rng)[0]


def inward_normals(contour: np.ndarray, component: np.ndarray) -> np.ndarray:
    """Unit normals pointing into ``component`` at each contour point.

    Tangents are central differences along the closed contour. For the
    clockwise trace the right-hand normal points inward; it is flipped when
    the component plainly lies on the other side, and is zero where the
    contour doubles back on itself.
    """
    pts = contour.astype(np.float64)
    tangent = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    length = np.hypot(normal[:, 0], normal[:, 1])
    ok = length > 0
    normal[ok] /= length[ok, None]
    normal[~ok] = 0.0

    rows, cols = component.shape

    def hits(q):
        q = geometry.round_half_away(q)
        valid = (q[:, 0] >= 0) & (q[:, 0] < rows) & (q[:, 1] >= 0) & (q[:, 1] < cols)
        out = np.zeros(len(q), dtype=bool)
        out[valid] = component[q[valid, 0], q[valid, 1]]
        return out

    flip = ok & ~hits(pts + normal) & hits(pts - normal)
    normal[flip] *= -1
    return normal


def smooth_offsets(n_points: int, cfg: ScribbleConfig, rng: np.random.Generator) -> np.ndarray:
    """Smooth random offsets in [0, offset_scale] for ``n_points`` arc positions."""
    m = math.ceil(n_points / 8) + 2
    values = rng.uniform(0.0, cfg.offset_scale, size=m)
    positions = np.linspace(0.0, n_points - 1, m)
    curve = nurbs.make_clamped(np.stack([positions, values], axis=1), degree=min(3, m - 1))
    dense = nurbs.sample(curve, max(8 * n_points, 64))
    # x(u) is monotone because the control abscissae increase
    return np.interp(np.arange(n_points), dense[:, 0], dense[:, 1])


def border_scribble(class_mask, cfg: ScribbleConfig, rng: np.random.Generator) -> np.ndarray:
    """A stretch of the class contour nudged inward by a smooth random offset."""
    mask = check_mask(class_mask, "class_mask")
    empty = np.zeros(mask.shape, dtype=bool)
    labels, sizes, keep = _eligible_components(mask, cfg.min_component_pixels)
    if len(keep) == 0:
        return empty
    chosen = int(keep[_pick_weighted(rng, sizes[keep - 1])])
    contour = geometry.trace_boundary(labels, chosen).points
    perimeter = len(contour)
    if perimeter < 2:
        return empty

    frac = rng.uniform(*cfg.arc_fraction)
    arc_len = min(perimeter, max(2, int(round(frac * perimeter))))
    start = int(rng.integers(perimeter))
    idx = (start + np.arange(arc_len)) % perimeter

    normals = inward_normals(contour, labels == chosen)[idx]
    offsets = smooth_offsets(arc_len, cfg, rng)
    path = contour[idx] + offsets[:, None] * normals
    return geometry.rasterize_polyline(path, mask.shape) & mask


def generate_slice(sl: LabelSlice | np.ndarray, classes, cfg: ScribbleConfig, rng: ScribbleRng,
                   ignore_label: int = 255, slice_index: int | None = None) -> np.ndarray:
    """Sparse labels for one slice: both scribble types for each class present."""
    if isinstance(sl, LabelSlice):
        dense, slice_index = sl.data, sl.index if slice_index is None else slice_index
    else:
        dense = np.asarray(sl)
        slice_index = 0 if slice_index is None else slice_index
    out = np.full(dense.shape, ignore_label, dtype=np.int64)
    for c in classes:
        if c == 0 and not cfg.include_background:
            continue
        class_mask = dense == c
        if not class_mask.any():
            continue
        stroke = interior_scribble(class_mask, cfg, rng.stream(slice_index, c, INTERIOR))
        stroke |= border_scribble(class_mask, cfg, rng.stream(slice_index, c, BORDER))
        out[stroke] = c
    return out


def _storage_dtype(ignore_label: int):
    return np.uint8 if ignore_label <= 0xFF else np.uint16 if ignore_label <= 0xFFFF else np.uint32


def generate_volume(v: LabelVolume, cfg: ScribbleConfig, volume_id: str = "", classes=None) -> LabelVolume:
    """Scribble every slice of ``v`` along ``cfg.slice_axis``; grid metadata is copied."""
    check_volume(v)
    if classes is None:
        classes = v.class_ids()
    classes = sorted(int(c) for c in classes)
    ignore = cfg.ignore_label if cfg.ignore_label is not None else v.ignore_label
    if ignore in classes:
        raise ValueError(f"ignore label {ignore} collides with a class id")
    rng = ScribbleRng(cfg.master_seed, volume_id)
    out = np.empty(v.dims, dtype=_storage_dtype(max(ignore, max(classes, default=0))))
    axis = cfg.slice_axis
    for index in range(v.dims[axis]):
        sl = slice_extract(v, axis, index)
        plane = generate_slice(sl, classes, cfg, rng, ignore_label=ignore)
        target = [slice(None)] * 3
        target[axis] = index
        out[tuple(target)] = plane
    return dataclasses.replace(v, data=out, ignore_label=ignore)


def check_scribble_correctness(scribbles: LabelVolume, dense: LabelVolume) -> int:
    """Number of annotated voxels whose label disagrees with the dense reference."""
    annotated = scribbles.data != scribbles.ignore_label
    return int(np.count_nonzero(annotated & (scribbles.data != dense.data)))


class ScribbleGenerator(BaseEstimator, TransformerMixin):
    """Estimator-style front end for scribble synthesis.

    ``fit`` records the union of class ids over the given dense volumes so
    every volume is scribbled against the same class list; ``transform``
    maps dense volumes to scribble volumes.

    Parameters mirror :class:`ScribbleConfig` one to one.
    """

    def __init__(self, slice_axis=2, erosion_radius=2.0, erosion_fallbacks=(2.0, 1.0, 0.0),
                 control_points=(4, 8), weight_range=(0.5, 2.0), samples_per_curve=128,
                 arc_fraction=(0.1, 0.25), offset_scale=1.5, min_component_pixels=10,
                 include_background=True, master_seed=0, ignore_label=None):
        self.slice_axis = slice_axis
        self.erosion_radius = erosion_radius
        self.erosion_fallbacks = erosion_fallbacks
        self.control_points = control_points
        self.weight_range = weight_range
        self.samples_per_curve = samples_per_curve
        self.arc_fraction = arc_fraction
        self.offset_scale = offset_scale
        self.min_component_pixels = min_component_pixels
        self.include_background = include_background
        self.master_seed = master_seed
        self.ignore_label = ignore_label

    @classmethod
    def from_config(cls, cfg: ScribbleConfig) -> "ScribbleGenerator":
        return cls(**dataclasses.asdict(cfg))

    def _config(self) -> ScribbleConfig:
        return ScribbleConfig.from_dict(self.get_params())

    @staticmethod
    def _as_list(X):
        return [X] if isinstance(X, LabelVolume) else list(X)

    def fit(self, X, y=None):
        self.config_ = self._config()
        volumes = [check_volume(v) for v in self._as_list(X)]
        classes = set()
        for v in volumes:
            classes.update(v.class_ids())
        self.classes_ = np.array(sorted(classes), dtype=np.int64)
        return self

    def transform(self, X, volume_ids=None):
        check_is_fitted(self, ["config_", "classes_"])
        single = isinstance(X, LabelVolume)
        volumes = self._as_list(X)
        if volume_ids is None:
            volume_ids = [""] if single else [str(i) for i in range(len(volumes))]
        if len(volume_ids) != len(volumes):
            raise ValueError("need one volume id per volume")
        out = [
            generate_volume(check_volume(v), self.config_, vid, classes=self.classes_)
            for v, vid in zip(volumes, volume_ids)
        ]
        return out[0] if single else out
