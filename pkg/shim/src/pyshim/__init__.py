"""Interop companion for MLS1 segmentation pipelines.

Converts external dense-prediction array dumps into MLS1 score files
and renders dumped evolution frames to composite images. Strictly
optional: the engine and its suite run without this package.
"""

from .convert import ConversionJob, LayoutError, convert, load_array
from .formats import (
    FileFormatError,
    read_label_map,
    read_stack,
    write_rgb,
    write_stack,
)
from .render import (
    CONTOUR_COLOR,
    LABEL_COLORS,
    RenderReport,
    interface_mask,
    render_frames,
)

__version__ = "0.1.0"
