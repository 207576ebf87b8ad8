"""Rational B-spline (NURBS) curves in the plane.

Curves are evaluated by direct summation of Cox-de Boor basis values, which
is plenty for the handful of control points a scribble uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    degree: int
    control_points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    knots: np.ndarray  # (n + degree + 1,)

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        kv = np.asarray(self.knots, dtype=np.float64)
        p = int(self.degree)
        if p < 1:
            raise ValueError("degree must be at least 1")
        if cp.ndim != 2 or cp.shape[1] != 2:
            raise ValueError("control points must have shape (n, 2)")
        n = len(cp)
        if n < p + 1:
            raise ValueError(f"{n} control points are too few for degree {p}")
        if w.shape != (n,):
            raise ValueError("need exactly one weight per control point")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if kv.shape != (n + p + 1,):
            raise ValueError(f"expected {n + p + 1} knots, got {len(kv)}")
        if np.any(np.diff(kv) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.ptp(kv[: p + 1]) != 0 or np.ptp(kv[-(p + 1) :]) != 0:
            raise ValueError("knot vector must be clamped")
        for name, arr in (("control_points", cp), ("weights", w), ("knots", kv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "degree", p)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])


def clamped_uniform_knots(n_points: int, degree: int) -> np.ndarray:
    n_inner = n_points - degree - 1
    inner = np.arange(1, n_inner + 1) / (n_inner + 1)
    return np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])


def make_clamped(control_points, weights=None, degree: int = 3) -> NurbsCurve:
    """Clamped curve on [0, 1] with uniformly spaced interior knots."""
    cp = np.asarray(control_points, dtype=np.float64)
    if weights is None:
        weights = np.ones(len(cp))
    if degree < 1 or len(cp) < degree + 1:
        raise ValueError(f"{len(cp)} control points are too few for degree {degree}")
    return NurbsCurve(degree, cp, weights, clamped_uniform_knots(len(cp), degree))


def basis_matrix(knots, degree: int, us) -> np.ndarray:
    """Non-rational basis values for many parameters, shape ``(len(us), n_basis)``.

    Degree-0 spans are half-open except that a parameter equal to the last
    knot falls into the last non-empty span; 0/0 terms count as zero.
    """
    kv = np.asarray(knots, dtype=np.float64)
    us = np.atleast_1d(np.asarray(us, dtype=np.float64))
    lo, hi = kv[0], kv[-1]
    if np.any((us < lo) | (us > hi)):
        raise ValueError(f"parameter outside [{lo}, {hi}]")
    m = len(kv) - 1
    n_basis = m - degree
    if n_basis < 1:
        raise ValueError("knot vector too short for degree")

    u = us[:, None]
    N = ((kv[:-1] <= u) & (u < kv[1:])).astype(np.float64)
    at_end = us == hi
    if at_end.any():
        last = np.nonzero(kv[:-1] < kv[1:])[0][-1]
        N[at_end] = 0.0
        N[at_end, last] = 1.0
    for p in range(1, degree + 1):
        left = kv[p:m] - kv[: m - p]
        right = kv[p + 1 : m + 1] - kv[1 : m - p + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(left > 0, (u - kv[: m - p]) / np.where(left > 0, left, 1.0), 0.0)
            b = np.where(right > 0, (kv[p + 1 : m + 1] - u) / np.where(right > 0, right, 1.0), 0.0)
        N = a * N[:, : m - p] + b * N[:, 1 : m - p + 1]
    return N[:, :n_basis]


def basis(knots, degree: int, u: float) -> np.ndarray:
    """Cox-de Boor basis values N_{i,degree}(u) for every control index."""
    return basis_matrix(knots, degree, [u])[0]


def rational_basis(curve: NurbsCurve, u: float) -> np.ndarray:
    wn = curve.weights * basis(curve.knots, curve.degree, u)
    return wn / wn.sum()


def evaluate(curve: NurbsCurve, u: float) -> np.ndarray:
    return rational_basis(curve, u) @ curve.control_points


def evaluate_many(curve: NurbsCurve, us) -> np.ndarray:
    wn = basis_matrix(curve.knots, curve.degree, us) * curve.weights
    return (wn @ curve.control_points) / wn.sum(axis=1, keepdims=True)


def sample(curve: NurbsCurve, n: int) -> np.ndarray:
    """``n`` points at uniform parameters across the curve domain."""
    if n < 2:
        raise ValueError("need at least two samples")
    lo, hi = curve.domain
    us = lo + (hi - lo) * np.arange(n) / (n - 1)
    us[-1] = hi
    return evaluate_many(curve, us)
