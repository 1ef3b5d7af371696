"""Exact Euclidean distance transforms and level-set initialisation."""

from __future__ import annotations

import numpy as np

from .fields import as_stack


def edt_squared(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest TRUE pixel.

    Separable two-pass construction: a row pass finds, per pixel, the
    1-d distance to the nearest TRUE pixel in its own row, then a column
    pass takes the lower envelope over rows of (row distance)^2 plus the
    squared vertical offset. All arithmetic stays on small integers so
    the result is exact. An empty mask yields max(H, W)^2 everywhere.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"expected a 2-d mask, got shape {mask.shape}")
    h, w = mask.shape
    if not mask.any():
        return np.full((h, w), np.int64(max(h, w)) ** 2, dtype=np.int64)

    # Row pass. Sentinel h + w dominates every admissible candidate, so
    # rows without TRUE pixels never win the envelope below.
    g = np.full((h, w), h + w, dtype=np.int64)
    g[mask] = 0
    for j in range(1, w):
        np.minimum(g[:, j], g[:, j - 1] + 1, out=g[:, j])
    for j in range(w - 2, -1, -1):
        np.minimum(g[:, j], g[:, j + 1] + 1, out=g[:, j])

    # Column pass: d2[i, j] = min_k g[k, j]^2 + (i - k)^2.
    g2 = g.astype(np.int64) ** 2
    rows = np.arange(h, dtype=np.int64)
    offs = (rows[:, None] - rows[None, :]) ** 2
    return np.min(g2[None, :, :] + offs[:, :, None], axis=1)


def edt(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance to the nearest TRUE pixel, 0 on TRUE."""
    return np.sqrt(edt_squared(mask).astype(np.float64))


def init_phi(scores: np.ndarray) -> np.ndarray:
    """Build a level-set stack from per-class confidences in [0, 1].

    Each class plane is binarised at 0.5, turned into a signed distance
    that is negative inside the binarised region, normalised by
    max(H, W) and clamped to [-0.5, 0.5], then shifted by (0.5 - score)
    so that confident pixels sit further from the zero level. The final
    plane is clamped to [-1, 1].
    """
    scores = as_stack(scores)
    if scores.min() < -1e-6 or scores.max() > 1.0 + 1e-6:
        raise ValueError("scores must lie in [0, 1]")
    n, h, w = scores.shape
    norm = float(max(h, w))
    phi = np.empty_like(scores)
    for i in range(n):
        inside = scores[i] >= 0.5
        d = edt(inside) - edt(~inside)
        d = np.clip(d / norm, -0.5, 0.5)
        phi[i] = np.clip(d + (0.5 - scores[i]), -1.0, 1.0)
    return phi
