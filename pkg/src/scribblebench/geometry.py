"""Binary mask primitives on 2D pixel grids.

Masks are plain boolean ``numpy`` arrays indexed ``[row, col]``; points are
``(row, col)`` pairs in the same index space, with pixel ``(i, j)`` covering
``[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)``. Pixels beyond the grid edge
count as background everywhere in this module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Moore neighbourhood, clockwise on screen (rows grow downward), starting west.
MOORE_OFFSETS = np.array(
    [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)],
    dtype=np.int64,
)
_OFFSET_INDEX = {tuple(o): k for k, o in enumerate(MOORE_OFFSETS.tolist())}

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True, eq=False)
class Contour:
    points: np.ndarray  # (n, 2) int64 (row, col)
    closed: bool = True

    def __len__(self) -> int:
        return len(self.points)


def _as_mask(m) -> np.ndarray:
    m = np.asarray(m, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"expected a 2D mask, got shape {m.shape}")
    return m


def inside_distance(m) -> np.ndarray:
    """Euclidean distance from each mask pixel to the nearest background pixel (0 outside)."""
    m = _as_mask(m)
    if not m.any():
        return np.zeros(m.shape)
    padded = np.pad(m, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def erode(m, radius: float) -> np.ndarray:
    """Keep pixels farther than ``radius`` from every background pixel (disk element)."""
    m = _as_mask(m)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return inside_distance(m) > radius


def boundary_mask(m) -> np.ndarray:
    """Mask pixels with at least one 4-neighbour outside the mask."""
    m = _as_mask(m)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior


def distance_to_boundary(m) -> np.ndarray:
    """Distance from every pixel to the nearest boundary pixel of ``m``."""
    b = boundary_mask(m)
    if not b.any():
        return np.full(b.shape, np.inf)
    return ndimage.distance_transform_edt(~b)


def connected_components(m, connectivity: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Label connected components.

    Returns ``(labels, sizes)`` where ``labels`` holds ids ``1..n`` in raster
    order of first appearance and ``sizes[k - 1]`` is the pixel count of id k.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    m = _as_mask(m)
    labels, n = ndimage.label(m, structure=_STRUCTURES[connectivity])
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return labels.astype(np.int64), sizes.astype(np.int64)


def trace_boundary(m, component_id: int | None = None) -> Contour:
    """Moore-neighbour trace of a component's outer boundary.

    ``m`` is either a labels grid from :func:`connected_components` (pass
    ``component_id``) or a boolean mask holding one 8-connected component.
    The trace starts at the lexicographically smallest pixel, runs clockwise
    and stops when the first move is about to repeat. Pixels that only
    border interior holes are not part of the outer trace.
    """
    grid = np.asarray(m)
    comp = grid == component_id if component_id is not None else grid.astype(bool)
    if comp.ndim != 2:
        raise ValueError("expected a 2D grid")
    coords = np.argwhere(comp)
    if len(coords) == 0:
        raise ValueError(f"component {component_id} is empty")
    rows, cols = comp.shape

    def inside(r, c):
        return 0 <= r < rows and 0 <= c < cols and comp[r, c]

    start = (int(coords[0][0]), int(coords[0][1]))
    cur, back = start, 0  # west of the first raster pixel is never in the component
    points = []
    first_next = None
    while True:
        nxt = None
        for k in range(1, 9):
            d = (back + k) % 8
            r, c = cur[0] + MOORE_OFFSETS[d][0], cur[1] + MOORE_OFFSETS[d][1]
            if inside(r, c):
                nxt = (int(r), int(c))
                prev = MOORE_OFFSETS[(d - 1) % 8]
                back_pos = (cur[0] + prev[0] - nxt[0], cur[1] + prev[1] - nxt[1])
                break
        if nxt is None:  # isolated pixel
            return Contour(np.array([start], dtype=np.int64), closed=True)
        if first_next is None:
            first_next = nxt
        elif cur == start and nxt == first_next:
            break
        points.append(cur)
        cur, back = nxt, _OFFSET_INDEX[back_pos]
    return Contour(np.array(points, dtype=np.int64), closed=True)


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def _segment_pixels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rounded samples on (a, b]; ``a`` itself is emitted by the caller."""
    steps = max(1, int(np.ceil(np.max(np.abs(b - a)))))
    out: list[np.ndarray] = []

    def emit(t0, p0, t1, depth=0):
        p1 = round_half_away(a + t1 * (b - a))
        # half-away rounding can skip a pixel across zero; bisect such steps
        if np.max(np.abs(p1 - p0)) > 1 and depth < 8:
            mid = 0.5 * (t0 + t1)
            pm = emit(t0, p0, mid, depth + 1)
            return emit(mid, pm, t1, depth + 1)
        out.append(p1)
        return p1

    t_prev, p_prev = 0.0, round_half_away(a)
    for k in range(1, steps + 1):
        t = k / steps
        p_prev = emit(t_prev, p_prev, t)
        t_prev = t
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def polyline_pixels(points) -> np.ndarray:
    """Ordered, deduplicated 8-connected pixel chain along a polyline (unclipped).

    Each segment is sampled at most one pixel apart on both axes and the
    samples are rounded, so every pixel centre lies within sqrt(2)/2 of the
    continuous polyline and consecutive pixels are 8-neighbours. Segments
    between 8-adjacent pixel centres therefore add no extra pixels.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("polyline needs at least one point")
    chunks = [round_half_away(pts[:1])]
    for a, b in zip(pts[:-1], pts[1:]):
        chunks.append(_segment_pixels(a, b))
    chain = np.concatenate(chunks)
    keep = np.ones(len(chain), dtype=bool)
    keep[1:] = np.any(chain[1:] != chain[:-1], axis=1)
    return chain[keep]


def rasterize_polyline(points, extents) -> np.ndarray:
    """Rasterize a polyline into a boolean mask of shape ``extents``; off-grid pixels are dropped."""
    rows, cols = int(extents[0]), int(extents[1])
    chain = polyline_pixels(points)
    ok = (chain[:, 0] >= 0) & (chain[:, 0] < rows) & (chain[:, 1] >= 0) & (chain[:, 1] < cols)
    out = np.zeros((rows, cols), dtype=bool)
    out[chain[ok, 0], chain[ok, 1]] = True
    return out
