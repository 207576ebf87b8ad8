"""Brute-force reference implementations used only by the tests.

Nothing here imports the code under test; each routine is the slow,
obviously-correct version of a library operation.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np


def erode_bruteforce(mask: np.ndarray, radius: float) -> np.ndarray:
    """Keep a pixel iff every pixel within Euclidean distance <= radius is set (off-grid = unset)."""
    rows, cols = mask.shape
    r = int(math.floor(radius))
    offsets = [(di, dj) for di in range(-r - 1, r + 2) for dj in range(-r - 1, r + 2)
               if di * di + dj * dj <= radius * radius]
    out = np.zeros_like(mask, dtype=bool)
    for i in range(rows):
        for j in range(cols):
            if not mask[i, j]:
                continue
            ok = True
            for di, dj in offsets:
                a, b = i + di, j + dj
                if not (0 <= a < rows and 0 <= b < cols and mask[a, b]):
                    ok = False
                    break
            out[i, j] = ok
    return out


def neighbours(connectivity: int):
    if connectivity == 4:
        return [(-1, 0), (1, 0), (0, -1), (0, 1)]
    return [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]


def flood_fill_partition(mask: np.ndarray, connectivity: int) -> set[frozenset]:
    """Components as a set of frozensets of (row, col)."""
    rows, cols = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    parts = set()
    for i in range(rows):
        for j in range(cols):
            if mask[i, j] and not seen[i, j]:
                comp = []
                stack = [(i, j)]
                seen[i, j] = True
                while stack:
                    a, b = stack.pop()
                    comp.append((a, b))
                    for di, dj in neighbours(connectivity):
                        c, d = a + di, b + dj
                        if 0 <= c < rows and 0 <= d < cols and mask[c, d] and not seen[c, d]:
                            seen[c, d] = True
                            stack.append((c, d))
                parts.add(frozenset(comp))
    return parts


def outer_boundary_bruteforce(component: np.ndarray) -> set[tuple[int, int]]:
    """Component pixels 4-adjacent to the background region connected to the grid frame.

    The background is flood-filled with 4-connectivity from a one-pixel
    padding ring, which is the complement topology of an 8-connected object.
    """
    padded = np.pad(component, 1, constant_values=False)
    rows, cols = padded.shape
    outside = np.zeros_like(padded, dtype=bool)
    queue = deque([(0, 0)])
    outside[0, 0] = True
    while queue:
        a, b = queue.popleft()
        for di, dj in neighbours(4):
            c, d = a + di, b + dj
            if 0 <= c < rows and 0 <= d < cols and not padded[c, d] and not outside[c, d]:
                outside[c, d] = True
                queue.append((c, d))
    result = set()
    for a in range(1, rows - 1):
        for b in range(1, cols - 1):
            if padded[a, b] and any(outside[a + di, b + dj] for di, dj in neighbours(4)):
                result.add((a - 1, b - 1))
    return result


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(x, dtype=np.float64) for x in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def distance_to_polyline(p, points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 1:
        return float(np.linalg.norm(np.asarray(p, dtype=np.float64) - pts[0]))
    return min(point_segment_distance(p, a, b) for a, b in zip(pts[:-1], pts[1:]))


def is_8_connected(pixels) -> bool:
    pixels = {tuple(map(int, p)) for p in pixels}
    if not pixels:
        return True
    start = next(iter(pixels))
    seen = {start}
    stack = [start]
    while stack:
        a, b = stack.pop()
        for di, dj in neighbours(8):
            q = (a + di, b + dj)
            if q in pixels and q not in seen:
                seen.add(q)
                stack.append(q)
    return seen == pixels


def dense_cross_entropy(logits, labels) -> float:
    """Plain-loop mean cross-entropy over every voxel."""
    C, N = logits.shape
    total = 0.0
    for j in range(N):
        col = [float(logits[c, j]) for c in range(C)]
        m = max(col)
        lse = m + math.log(sum(math.exp(v - m) for v in col))
        total += lse - col[int(labels[j])]
    return total / N


def dense_soft_dice_loss(logits, labels, smooth) -> float:
    """Plain-loop 1 - mean soft Dice over classes present in ``labels``."""
    C, N = logits.shape
    probs = []
    for j in range(N):
        col = [float(logits[c, j]) for c in range(C)]
        m = max(col)
        e = [math.exp(v - m) for v in col]
        s = sum(e)
        probs.append([v / s for v in e])
    dices = []
    for c in range(C):
        tsum = sum(1 for j in range(N) if labels[j] == c)
        if tsum == 0:
            continue
        inter = sum(probs[j][c] for j in range(N) if labels[j] == c)
        psum = sum(probs[j][c] for j in range(N))
        dices.append((2 * inter + smooth) / (psum + tsum + smooth))
    return 1.0 - sum(dices) / len(dices)


def dice_triple_loop(pred: np.ndarray, ref: np.ndarray, c: int) -> float:
    inter = p_count = r_count = 0
    X, Y, Z = pred.shape
    for i in range(X):
        for j in range(Y):
            for k in range(Z):
                p = pred[i, j, k] == c
                r = ref[i, j, k] == c
                p_count += p
                r_count += r
                inter += p and r
    if p_count + r_count == 0:
        return float("nan")
    return 2.0 * inter / (p_count + r_count)


def in_convex_hull(points: np.ndarray, hull_points: np.ndarray, tol: float = 1e-9) -> bool:
    """Gift-wrapping hull and half-plane tests, independent of scipy."""
    pts = sorted(map(tuple, np.asarray(hull_points, dtype=np.float64)))
    pts = list(dict.fromkeys(pts))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # degenerate: collinear control points
        a, b = np.array(pts[0]), np.array(pts[-1])
        return all(point_segment_distance(q, a, b) <= tol for q in points)
    scale = max(1.0, float(np.max(np.abs(hull_points))))
    for q in points:
        for a, b in zip(hull, hull[1:] + hull[:1]):
            if cross(a, b, q) < -tol * scale * scale:
                return False
    return True
