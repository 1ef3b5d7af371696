"""Grid containers and finite-difference stencils shared by the whole engine.

Array conventions, used everywhere and not repeated per signature:

* scalar field: float64 array of shape (H, W); x runs along columns
  (axis 1), y along rows (axis 0)
* field stack:  float64 array of shape (N, H, W), one plane per class
* vector field: pair (ux, uy) of scalar fields
* label map:    int64 array of shape (H, W)
* binary mask:  bool array of shape (H, W)

Every stencil treats the grid border with replicate (Neumann) handling:
the missing neighbour of an edge pixel is the edge pixel itself, so
first differences pointing out of the grid vanish and centred
differences degrade to one-sided ones at the border.
"""

from __future__ import annotations

import numpy as np

# |grad| floor applied wherever a unit normal is formed; keeps flat
# plateaus from producing NaN normals without visibly biasing fronts.
GRAD_FLOOR = 1e-8


def as_field(a) -> np.ndarray:
    f = np.asarray(a, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected a 2-d scalar field, got shape {f.shape}")
    return f


def as_stack(a) -> np.ndarray:
    s = np.asarray(a, dtype=np.float64)
    if s.ndim != 3 or s.shape[0] < 1:
        raise ValueError(f"expected an (N, H, W) stack, got shape {s.shape}")
    return s


def require_finite(a, what: str = "array") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains NaN or Inf")


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Expand a label map into an (n_classes, H, W) stack of 0/1 planes."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"expected a 2-d label map, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("label outside [0, n_classes)")
    planes = np.zeros((n_classes, *labels.shape), dtype=np.float64)
    for c in range(n_classes):
        planes[c][labels == c] = 1.0
    return planes


def gradient_central(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centred first derivatives (ux, uy), one-sided at the border."""
    f = as_field(f)
    ux = np.gradient(f, axis=1)
    uy = np.gradient(f, axis=0)
    return ux, uy


def divergence(v: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """div v = d(ux)/dx + d(uy)/dy with the same stencil as gradient_central."""
    ux, uy = v
    ux = as_field(ux)
    uy = as_field(uy)
    if ux.shape != uy.shape:
        raise ValueError("vector components differ in shape")
    return np.gradient(ux, axis=1) + np.gradient(uy, axis=0)


def upwind_grad_mag(phi: np.ndarray, speed: np.ndarray) -> np.ndarray:
    """Godunov |grad phi| for advection under the given normal speed.

    One-sided differences are combined so information is taken from the
    upwind side: where speed >= 0 the front expands and the scheme keeps
    max(D-, 0) and min(D+, 0) per axis, where speed < 0 the roles swap.
    Zero speed takes the expanding branch. Replicate borders make the
    outward difference vanish at the edge of the grid.
    """
    phi = as_field(phi)
    speed = as_field(speed)
    if phi.shape != speed.shape:
        raise ValueError("phi and speed differ in shape")
    dxm = np.diff(phi, axis=1, prepend=phi[:, :1])
    dxp = np.diff(phi, axis=1, append=phi[:, -1:])
    dym = np.diff(phi, axis=0, prepend=phi[:1, :])
    dyp = np.diff(phi, axis=0, append=phi[-1:, :])
    zero = np.zeros_like(phi)
    expand = np.sqrt(
        np.maximum(dxm, zero) ** 2 + np.minimum(dxp, zero) ** 2
        + np.maximum(dym, zero) ** 2 + np.minimum(dyp, zero) ** 2
    )
    shrink = np.sqrt(
        np.minimum(dxm, zero) ** 2 + np.maximum(dxp, zero) ** 2
        + np.minimum(dym, zero) ** 2 + np.maximum(dyp, zero) ** 2
    )
    return np.where(speed >= 0.0, expand, shrink)


def box_mean(f: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window around each pixel, replicate borders.

    radius 0 is the identity.
    """
    f = as_field(f)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return f.copy()
    h, w = f.shape
    padded = np.pad(f, radius, mode="edge")
    acc = np.zeros_like(f)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            acc += padded[dy:dy + h, dx:dx + w]
    return acc / float((2 * radius + 1) ** 2)
