"""Synthetic label volumes built from simple solids.

Used as desk-scale stand-ins for real datasets. Shapes are painted in list
order, so later shapes overwrite earlier ones where they overlap.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .volume_io import LabelVolume

KINDS = ("sphere", "ellipsoid", "box")


@dataclass(frozen=True)
class Shape:
    kind: str
    class_id: int
    center: tuple[float, float, float]
    radii: tuple[float, float, float]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        radii = self.radii
        if np.isscalar(radii):
            radii = (radii,) * 3
        radii = tuple(float(r) for r in radii)
        if len(radii) != 3 or min(radii) <= 0:
            raise ValueError("radii must be positive")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "class_id", int(self.class_id))

    def mask(self, grid) -> np.ndarray:
        idx = np.indices(grid, dtype=np.float64)
        d = [(idx[a] - self.center[a]) / self.radii[a] for a in range(3)]
        if self.kind == "box":
            return (np.abs(d[0]) <= 1) & (np.abs(d[1]) <= 1) & (np.abs(d[2]) <= 1)
        return d[0] ** 2 + d[1] ** 2 + d[2] ** 2 <= 1.0


@dataclass(frozen=True)
class PhantomSpec:
    grid: tuple[int, int, int]
    shapes: tuple[Shape, ...]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    jitter: float = 0.1
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        object.__setattr__(self, "shapes", tuple(self.shapes))
        ids = sorted({s.class_id for s in self.shapes})
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"shape class ids must be contiguous from 1, got {ids}")
        if not self.class_names:
            names = ["background"] + [f"class_{c}" for c in ids]
            object.__setattr__(self, "class_names", tuple(names))

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @classmethod
    def from_dict(cls, values: dict) -> "PhantomSpec":
        values = dict(values)
        shapes = tuple(Shape(**s) for s in values.pop("shapes"))
        names = tuple(values.pop("class_names", ()))
        return cls(shapes=shapes, class_names=names, **values)

    @classmethod
    def load(cls, path) -> "PhantomSpec":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


def default_spec() -> PhantomSpec:
    """A 48^3 grid holding a sphere and an overlapping box."""
    return PhantomSpec(
        grid=(48, 48, 48),
        shapes=(
            Shape("sphere", 1, (24, 24, 24), 10),
            Shape("box", 2, (12, 34, 24), (6, 7, 14)),
        ),
        class_names=("background", "sphere", "box"),
    )


def render(spec: PhantomSpec) -> LabelVolume:
    labels = np.zeros(spec.grid, dtype=np.uint8)
    for shape in spec.shapes:
        labels[shape.mask(spec.grid)] = shape.class_id
    for c in range(1, spec.n_classes):
        if not np.any(labels == c):
            raise ValueError(f"class {c} ({spec.class_names[c]}) is empty in the rendered phantom")
    return LabelVolume(labels, spec.spacing)


def jittered(spec: PhantomSpec, rng: np.random.Generator) -> PhantomSpec:
    """Copy of ``spec`` with centers shifted and radii scaled by up to ``jitter``."""
    grid = np.array(spec.grid, dtype=np.float64)
    shapes = []
    for s in spec.shapes:
        center = np.array(s.center) + rng.uniform(-1, 1, 3) * spec.jitter * grid / 4
        radii = np.array(s.radii) * (1 + rng.uniform(-1, 1, 3) * spec.jitter)
        shapes.append(replace(s, center=tuple(center), radii=tuple(radii)))
    return replace(spec, shapes=tuple(shapes))


def random_spec(rng: np.random.Generator, grid=(64, 64, 64), n_foreground: int = 2,
                radius_range=(8.0, 20.0)) -> PhantomSpec:
    """Random solids, one per foreground class, placed so they fit the grid."""
    grid = tuple(int(g) for g in grid)
    shapes = []
    for c in range(1, n_foreground + 1):
        kind = KINDS[int(rng.integers(len(KINDS)))]
        if kind == "sphere":
            radii = (float(rng.uniform(*radius_range)),) * 3
        else:
            radii = tuple(float(r) for r in rng.uniform(*radius_range, 3))
        center = tuple(
            float(rng.uniform(min(r, g / 2), max(g - 1 - r, g / 2))) for r, g in zip(radii, grid)
        )
        shapes.append(Shape(kind, c, center, radii))
    return PhantomSpec(grid, tuple(shapes))
