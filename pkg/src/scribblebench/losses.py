"""Partial losses evaluated on scribble-labeled voxels only.

Reference implementations in float64 of partial cross-entropy, partial
soft Dice and their weighted sum, each returning the loss value and its
analytic gradient with respect to the logits. Logits are laid out as
``(C, N)``: one column per voxel.

Only labeled columns ever enter a reduction, so logits at ignored voxels
cannot influence the result, not even through rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .validation import check_logits, check_target

IGNORE_INDEX = 255


@dataclass(frozen=True, eq=False)
class LossResult:
    value: float
    gradient: np.ndarray  # (C, N)


def softmax_columns(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def _labeled(logits, labels, ignore_index):
    z = check_logits(logits)
    t = check_target(labels, z.shape[0], z.shape[1], ignore_index)
    cols = np.nonzero(t != ignore_index)[0]
    return z, t, cols


def partial_cross_entropy(logits, labels, ignore_index: int = IGNORE_INDEX) -> LossResult:
    """Mean negative log-likelihood over labeled voxels; 0 with zero gradient if none are labeled."""
    z, t, cols = _labeled(logits, labels, ignore_index)
    grad = np.zeros_like(z)
    n = len(cols)
    if n == 0:
        return LossResult(0.0, grad)
    zl = z[:, cols]
    shift = zl.max(axis=0)
    log_norm = shift + np.log(np.exp(zl - shift).sum(axis=0))
    picked = zl[t[cols], np.arange(n)]
    value = float(np.sum(log_norm - picked) / n)

    p = softmax_columns(zl)
    p[t[cols], np.arange(n)] -= 1.0
    grad[:, cols] = p / n
    return LossResult(value, grad)


def partial_dice(logits, labels, smooth: float = 1e-5, ignore_index: int = IGNORE_INDEX) -> LossResult:
    """One minus the mean soft Dice over classes present among the labeled voxels."""
    if smooth < 0:
        raise ValueError("smooth must be non-negative")
    z, t, cols = _labeled(logits, labels, ignore_index)
    grad = np.zeros_like(z)
    n = len(cols)
    if n == 0:
        return LossResult(0.0, grad)
    C = z.shape[0]
    p = softmax_columns(z[:, cols])
    onehot = np.zeros_like(p)
    onehot[t[cols], np.arange(n)] = 1.0

    inter = np.sum(p * onehot, axis=1)
    psum = np.sum(p, axis=1)
    tsum = np.sum(onehot, axis=1)
    present = np.nonzero(tsum > 0)[0]
    num = 2.0 * inter[present] + smooth
    den = psum[present] + tsum[present] + smooth
    value = float(1.0 - np.mean(num / den))

    # d(value)/dp for present classes, zero for absent ones
    dp = np.zeros((C, n))
    dp[present] = -(2.0 * onehot[present] * den[:, None] - num[:, None]) / (den[:, None] ** 2) / len(present)
    # chain rule through the column softmax
    grad[:, cols] = p * (dp - np.sum(p * dp, axis=0, keepdims=True))
    return LossResult(value, grad)


def partial_loss(logits, labels, weights=(1.0, 1.0), smooth: float = 1e-5,
                 ignore_index: int = IGNORE_INDEX) -> LossResult:
    """Weighted sum of partial cross-entropy and partial Dice."""
    w_ce, w_dice = weights
    ce = partial_cross_entropy(logits, labels, ignore_index)
    dice = partial_dice(logits, labels, smooth, ignore_index)
    return LossResult(w_ce * ce.value + w_dice * dice.value, w_ce * ce.gradient + w_dice * dice.gradient)


def finite_diff_check(loss: Callable[..., LossResult], logits, labels, eps: float = 1e-3,
                      n_coords: int = 200, rng=None, stencil: str = "five-point", **kwargs) -> float:
    """Maximum relative error between analytic and central-difference gradients.

    ``stencil`` is ``"central"`` (two-point, O(eps^2)) or ``"five-point"``
    (O(eps^4)); the latter tolerates a larger step and so keeps roundoff
    well below the size of small gradient entries. Every coordinate is
    checked when there are at most ``n_coords``, otherwise a random subset
    of that size. Relative error uses ``max(|analytic|, |numeric|, 1e-12)``
    as denominator.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if stencil not in ("central", "five-point"):
        raise ValueError(f"unknown stencil {stencil!r}")
    rng = np.random.default_rng(rng)
    z = np.array(logits, dtype=np.float64)
    analytic = loss(z, labels, **kwargs).gradient
    total = z.size
    if total <= n_coords:
        flat = np.arange(total)
    else:
        flat = np.sort(rng.choice(total, size=n_coords, replace=False))

    def value_at(c, j, offset):
        orig = z[c, j]
        z[c, j] = orig + offset
        out = loss(z, labels, **kwargs).value
        z[c, j] = orig
        return out

    worst = 0.0
    for idx in flat:
        c, j = np.unravel_index(idx, z.shape)
        if stencil == "central":
            numeric = (value_at(c, j, eps) - value_at(c, j, -eps)) / (2.0 * eps)
        else:
            near = value_at(c, j, eps) - value_at(c, j, -eps)
            far = value_at(c, j, 2 * eps) - value_at(c, j, -2 * eps)
            # grouped so identical values cancel exactly
            numeric = (8.0 * near - far) / (12.0 * eps)
        a = analytic[c, j]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
        worst = max(worst, err)
    return float(worst)
