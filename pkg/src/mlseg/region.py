"""Per-class appearance statistics and Gaussian log-likelihood planes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import as_stack

VAR_FLOOR = 1e-4
# Plane value for classes with no support pixels; low enough that an
# absent class can never win an argmax or an argmin-over-phi later on.
EMPTY_LOGLIK = -1e6


@dataclass(frozen=True)
class RegionModel:
    """Diagonal Gaussian over image channels for one class."""

    class_index: int
    mean: np.ndarray   # (C,)
    var: np.ndarray    # (C,), floored at VAR_FLOOR
    pixel_count: int


def fit_regions(image: np.ndarray, labels: np.ndarray, n_classes: int) -> list[RegionModel]:
    """Channel-wise mean and variance of each class's pixels.

    Classes without pixels get a zero-mean, floor-variance sentinel
    model with pixel_count 0; loglik turns those into EMPTY_LOGLIK
    planes.
    """
    image = as_stack(image)
    labels = np.asarray(labels)
    if labels.shape != image.shape[1:]:
        raise ValueError("labels and image differ in spatial shape")
    c = image.shape[0]
    flat = image.reshape(c, -1)
    lab = labels.reshape(-1)
    models = []
    for k in range(n_classes):
        sel = lab == k
        count = int(sel.sum())
        if count == 0:
            models.append(RegionModel(k, np.zeros(c), np.full(c, VAR_FLOOR), 0))
            continue
        vals = flat[:, sel]
        mean = vals.mean(axis=1)
        var = np.maximum(vals.var(axis=1), VAR_FLOOR)
        models.append(RegionModel(k, mean, var, count))
    return models


def loglik(image: np.ndarray, models: list[RegionModel]) -> np.ndarray:
    """Per-class log-likelihood planes under the fitted diagonal Gaussians.

    Channel terms sum: -0.5 log(2 pi var) - (I - mean)^2 / (2 var).
    """
    image = as_stack(image)
    c, h, w = image.shape
    out = np.empty((len(models), h, w), dtype=np.float64)
    for i, m in enumerate(models):
        if m.pixel_count == 0:
            out[i] = EMPTY_LOGLIK
            continue
        if m.mean.shape != (c,):
            raise ValueError("model channel count does not match image")
        plane = np.zeros((h, w), dtype=np.float64)
        for ch in range(c):
            v = m.var[ch]
            plane += -0.5 * np.log(2.0 * np.pi * v)
            plane -= (image[ch] - m.mean[ch]) ** 2 / (2.0 * v)
        out[i] = plane
    return out
