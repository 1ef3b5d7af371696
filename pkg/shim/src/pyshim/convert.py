"""Turn dense-prediction array dumps (.npy / .npz) into MLS1 score files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import write_stack

LAYOUTS = ("plane-major", "pixel-major")


class LayoutError(ValueError):
    """Array shape contradicts the declared axis layout."""


@dataclass(frozen=True)
class ConversionJob:
    """One array-to-MLS1 conversion.

    layout declares where the class axis sits: "plane-major" arrays are
    (classes, height, width), "pixel-major" arrays are (height, width,
    classes). apply_softmax normalizes each pixel across classes before
    writing, turning logits into confidences.
    """

    input_path: str | Path
    output_path: str | Path
    layout: str = "plane-major"
    apply_softmax: bool = False

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")


def load_array(path) -> np.ndarray:
    """Load a .npy array or the single entry of a .npz archive."""
    path = Path(path)
    loaded = np.load(path, allow_pickle=False)
    if isinstance(loaded, np.lib.npyio.NpzFile):
        names = loaded.files
        if len(names) != 1:
            raise ValueError(
                f"{path}: archive holds {len(names)} arrays, expected exactly one"
            )
        return np.asarray(loaded[names[0]])
    return np.asarray(loaded)


def convert(job: ConversionJob) -> Path:
    """Validate, reorder, optionally normalize, and write one MLS1 file.

    The class axis must carry the smallest extent of the array: dense
    predictions always have far fewer classes than rows or columns, so
    a declaration that puts a spatial axis in the class slot is a
    transposed dump and is rejected before anything is written.
    """
    array = load_array(job.input_path)
    if array.ndim != 3:
        raise LayoutError(f"expected a 3-d array, got shape {array.shape}")
    if np.iscomplexobj(array):
        raise LayoutError("expected a real-valued array")
    array = array.astype(np.float64)
    class_axis = 0 if job.layout == "plane-major" else 2
    if array.shape[class_axis] != min(array.shape):
        raise LayoutError(
            f"shape {array.shape} puts {array.shape[class_axis]} entries on the "
            f"declared class axis but the smallest extent is {min(array.shape)}; "
            f"the {job.layout} declaration does not match this array"
        )
    if job.layout == "pixel-major":
        array = array.transpose(2, 0, 1)
    if job.apply_softmax:
        array = array - array.max(axis=0, keepdims=True)
        np.exp(array, out=array)
        array /= array.sum(axis=0, keepdims=True)
    out = Path(job.output_path)
    write_stack(out, array)
    return out
