"""Render evolution frame dumps into composite images.

A frame is a labels_NNNN.pgm file with a phi_NNNN.mls1 companion, as
written by the engine's evolve --dump-frames option. Each composite is
a P6 image with two side-by-side panels: on the left the label map in
flat colors with the zero-level interface drawn in pure white, on the
right a grayscale heatmap of the winning (minimum) level-set value.
White never appears in the label palette, so the contour pixel set can
be recovered from the composite exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import FileFormatError, read_label_map, read_stack, write_rgb

# Flat label colors; cycled when a map carries more classes. No entry
# is pure white, which is reserved for the contour overlay.
LABEL_COLORS = np.array([
    (26, 26, 26),
    (230, 51, 51),
    (51, 230, 51),
    (51, 51, 230),
    (230, 230, 51),
    (230, 51, 230),
    (51, 230, 230),
    (153, 153, 153),
    (230, 140, 51),
    (140, 51, 230),
], dtype=np.uint8)

CONTOUR_COLOR = np.array((255, 255, 255), dtype=np.uint8)
FILLER_GRAY = 128

_LABEL_RE = re.compile(r"labels_(\d+)\.pgm$")
_PHI_RE = re.compile(r"phi_(\d+)\.mls1$")


@dataclass
class RenderReport:
    """What render_frames wrote and which inputs it had to skip or patch."""

    written: list[Path] = field(default_factory=list)
    problems: list[tuple[Path, str]] = field(default_factory=list)


def interface_mask(labels: np.ndarray) -> np.ndarray:
    """TRUE where any 4-neighbour carries a different label."""
    mask = np.zeros(labels.shape, dtype=bool)
    horiz = labels[:, :-1] != labels[:, 1:]
    mask[:, :-1] |= horiz
    mask[:, 1:] |= horiz
    vert = labels[:-1, :] != labels[1:, :]
    mask[:-1, :] |= vert
    mask[1:, :] |= vert
    return mask


def _label_panel(labels: np.ndarray) -> np.ndarray:
    panel = LABEL_COLORS[labels % len(LABEL_COLORS)]
    panel[interface_mask(labels)] = CONTOUR_COLOR
    return panel


def _phi_panel(phi: np.ndarray) -> np.ndarray:
    winning = phi.min(axis=0)
    lo, hi = float(winning.min()), float(winning.max())
    scale = (winning - lo) / (hi - lo) if hi > lo else np.full(winning.shape, 0.5)
    gray = np.rint(scale * 255.0).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def render_frames(frames_dir, out_dir) -> RenderReport:
    """Write one frame_NNNN.ppm composite per readable label dump.

    Unreadable or missing inputs are recorded in the report and
    processing continues; a frame whose phi companion is unusable is
    rendered with a flat gray right panel. An empty directory yields an
    empty report and no output files.
    """
    frames_dir = Path(frames_dir)
    out_dir = Path(out_dir)
    report = RenderReport()

    label_paths = {}
    for path in frames_dir.glob("labels_*.pgm"):
        match = _LABEL_RE.search(path.name)
        if match:
            label_paths[match.group(1)] = path
    phi_paths = {}
    for path in frames_dir.glob("phi_*.mls1"):
        match = _PHI_RE.search(path.name)
        if match:
            phi_paths[match.group(1)] = path
    for index in sorted(set(phi_paths) - set(label_paths)):
        report.problems.append((phi_paths[index], "no matching label map, frame skipped"))

    if label_paths:
        out_dir.mkdir(parents=True, exist_ok=True)
    for index in sorted(label_paths):
        label_path = label_paths[index]
        try:
            labels = read_label_map(label_path)
        except (FileFormatError, OSError) as exc:
            report.problems.append((label_path, str(exc)))
            continue
        left = _label_panel(labels)
        right = np.full(left.shape, FILLER_GRAY, dtype=np.uint8)
        phi_path = phi_paths.get(index)
        if phi_path is None:
            report.problems.append(
                (label_path.with_name(f"phi_{index}.mls1"), "missing companion stack")
            )
        else:
            try:
                phi = read_stack(phi_path)
                if phi.shape[1:] != labels.shape:
                    raise FileFormatError(
                        f"{phi_path}: stack is {phi.shape[1:]}, labels are {labels.shape}"
                    )
                right = _phi_panel(phi)
            except (FileFormatError, OSError) as exc:
                report.problems.append((phi_path, str(exc)))
        out_path = out_dir / f"frame_{index}.ppm"
        write_rgb(out_path, np.concatenate([left, right], axis=1))
        report.written.append(out_path)
    return report
