"""Readers and writers for the interchange files the shim speaks.

MLS1 score stacks: 4-byte magic "MLS1", then height, width and plane
count as little-endian unsigned 32-bit integers, then the planes as
32-bit little-endian floats, plane by plane, rows within a plane
contiguous. PGM label maps: binary P5, maxval 255, gray value is the
class index. Composite output images: binary P6.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

STACK_MAGIC = b"MLS1"


class FileFormatError(ValueError):
    """Malformed content in one of the interchange files."""


def write_stack(path, stack: np.ndarray) -> None:
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or min(stack.shape) < 1:
        raise FileFormatError(f"expected an (N, H, W) stack, got shape {stack.shape}")
    planes, h, w = stack.shape
    header = STACK_MAGIC + struct.pack("<III", h, w, planes)
    Path(path).write_bytes(header + stack.astype("<f4").tobytes())


def read_stack(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != STACK_MAGIC:
        raise FileFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 16:
        raise FileFormatError(f"{path}: truncated header")
    h, w, planes = struct.unpack("<III", data[4:16])
    if h < 1 or w < 1 or planes < 1:
        raise FileFormatError(f"{path}: bad dimensions {planes}x{h}x{w}")
    if len(data) != 16 + planes * h * w * 4:
        raise FileFormatError(f"{path}: payload length mismatch")
    raw = np.frombuffer(data[16:], dtype="<f4")
    return raw.reshape(planes, h, w).astype(np.float64)


def read_label_map(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FileFormatError(f"{path}: expected a P5 label map")
    pos = 2
    values = []
    while len(values) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FileFormatError(f"{path}: malformed header token {token!r}")
        values.append(int(token))
    pos += 1
    w, h, maxval = values
    if w < 1 or h < 1:
        raise FileFormatError(f"{path}: bad dimensions {w}x{h}")
    if maxval != 255:
        raise FileFormatError(f"{path}: only maxval 255 is supported")
    payload = data[pos:pos + w * h]
    if len(payload) != w * h:
        raise FileFormatError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.int64)


def write_rgb(path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 image as binary P6."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise FileFormatError(f"expected (H, W, 3) uint8, got {image.dtype} {image.shape}")
    h, w, _ = image.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + image.tobytes())
