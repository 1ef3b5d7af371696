"""Confusion-matrix segmentation metrics and label-map helpers."""

from __future__ import annotations

import numpy as np


def confusion(pred: np.ndarray, gt: np.ndarray, n_classes: int) -> np.ndarray:
    """counts[i, j] = pixels of true class i predicted as class j."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt differ in shape")
    pred = pred.reshape(-1)
    gt = gt.reshape(-1)
    for name, lab in (("pred", pred), ("gt", gt)):
        if lab.size and (lab.min() < 0 or lab.max() >= n_classes):
            raise ValueError(f"{name} label outside [0, n_classes)")
    counts = np.bincount(gt * n_classes + pred, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes).astype(np.int64)


def pixel_accuracy(counts: np.ndarray) -> float:
    counts = np.asarray(counts)
    total = counts.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    return float(np.trace(counts) / total)


def iou_per_class(counts: np.ndarray) -> np.ndarray:
    """IoU per class; NaN where the class appears in neither gt nor pred."""
    counts = np.asarray(counts, dtype=np.float64)
    inter = np.diag(counts)
    union = counts.sum(axis=1) + counts.sum(axis=0) - inter
    out = np.full(counts.shape[0], np.nan)
    nonzero = union > 0
    out[nonzero] = inter[nonzero] / union[nonzero]
    return out


def mean_iou(counts: np.ndarray) -> float:
    """Mean over classes with a nonempty union; absent classes are skipped."""
    ious = iou_per_class(counts)
    valid = ~np.isnan(ious)
    if not valid.any():
        raise ValueError("no class present in either map")
    return float(ious[valid].mean())


def class_frequencies(gts: list[np.ndarray], n_classes: int) -> np.ndarray:
    """Fraction of all pixels belonging to each class across the maps."""
    counts = np.zeros(n_classes, dtype=np.int64)
    total = 0
    for gt in gts:
        gt = np.asarray(gt).reshape(-1)
        if gt.size and (gt.min() < 0 or gt.max() >= n_classes):
            raise ValueError("label outside [0, n_classes)")
        counts += np.bincount(gt, minlength=n_classes)
        total += gt.size
    if total == 0:
        raise ValueError("no pixels given")
    return counts / float(total)


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """TRUE where any 4-neighbour carries a different label."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"expected a 2-d label map, got shape {labels.shape}")
    b = np.zeros(labels.shape, dtype=bool)
    horiz = labels[:, :-1] != labels[:, 1:]
    b[:, :-1] |= horiz
    b[:, 1:] |= horiz
    vert = labels[:-1, :] != labels[1:, :]
    b[:-1, :] |= vert
    b[1:, :] |= vert
    return b


def report(counts: np.ndarray) -> str:
    """Fixed-format text block with per-class IoU, pixel_acc and mean_iou."""
    ious = iou_per_class(counts)
    lines = [f"class_{i}_iou = {ious[i]:.6f}" for i in range(len(ious))]
    lines.append(f"pixel_acc = {pixel_accuracy(counts):.6f}")
    lines.append(f"mean_iou = {mean_iou(counts):.6f}")
    return "\n".join(lines) + "\n"
