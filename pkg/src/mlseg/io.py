"""Bit-exact file formats: PPM images, PGM labels, MLS1 stacks, MLSW models,
and the key = value run configuration."""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .learner import PredictorParams, TrainConfig
from .mls import EvolutionConfig

STACK_MAGIC = b"MLS1"
MODEL_MAGIC = b"MLSW"


class FormatError(ValueError):
    """Malformed or mismatched file content."""


class ConfigError(ValueError):
    """Bad run-configuration text; message carries the line number."""


def _read_pnm_header(data: bytes, magic: bytes, path) -> tuple[int, int, int]:
    """Parse magic, width, height, maxval; returns (w, h, payload offset)."""
    if not data.startswith(magic):
        raise FormatError(f"{path}: expected {magic.decode()} file")
    pos = len(magic)
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
            raise FormatError(f"{path}: malformed header token {token!r}")
        values.append(int(token))
    pos += 1  # single whitespace byte separates header from payload
    w, h, maxval = values
    if w < 1 or h < 1:
        raise FormatError(f"{path}: bad dimensions {w}x{h}")
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    return w, h, pos


def read_ppm(path) -> np.ndarray:
    """Load a P6 image as a (3, H, W) stack scaled to [0, 1]."""
    data = Path(path).read_bytes()
    w, h, pos = _read_pnm_header(data, b"P6", path)
    payload = data[pos:pos + 3 * w * h]
    if len(payload) != 3 * w * h:
        raise FormatError(f"{path}: truncated payload")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return raw.transpose(2, 0, 1).astype(np.float64) / 255.0


def write_ppm(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise FormatError(f"expected a (3, H, W) image, got shape {image.shape}")
    _, h, w = image.shape
    raw = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + raw.transpose(1, 2, 0).tobytes())


def read_labels(path, n_classes: int | None = None) -> np.ndarray:
    """Load a P5 label map; gray value is the class index."""
    data = Path(path).read_bytes()
    w, h, pos = _read_pnm_header(data, b"P5", path)
    payload = data[pos:pos + w * h]
    if len(payload) != w * h:
        raise FormatError(f"{path}: truncated payload")
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.int64)
    if n_classes is not None and labels.max(initial=0) >= n_classes:
        raise FormatError(
            f"{path}: gray value {int(labels.max())} outside {n_classes} classes"
        )
    return labels


def write_labels(path, labels: np.ndarray, n_classes: int | None = None) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise FormatError(f"expected a 2-d label map, got shape {labels.shape}")
    limit = 256 if n_classes is None else n_classes
    if limit > 256:
        raise FormatError("PGM labels support at most 256 classes")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= limit:
        raise FormatError(f"label outside [0, {limit})")
    h, w = labels.shape
    header = f"P5\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + labels.astype(np.uint8).tobytes())


def read_scores(path) -> np.ndarray:
    """Load an MLS1 stack; 32-bit floats on disk, 64-bit in memory."""
    data = Path(path).read_bytes()
    if data[:4] != STACK_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header")
    h, w, planes = struct.unpack("<III", data[4:16])
    if h < 1 or w < 1 or planes < 1:
        raise FormatError(f"{path}: bad dimensions {planes}x{h}x{w}")
    expected = 16 + planes * h * w * 4
    if len(data) != expected:
        raise FormatError(f"{path}: payload is {len(data) - 16} bytes, "
                          f"expected {expected - 16}")
    raw = np.frombuffer(data[16:], dtype="<f4")
    return raw.reshape(planes, h, w).astype(np.float64)


def write_scores(path, stack: np.ndarray) -> None:
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or min(stack.shape) < 1:
        raise FormatError(f"expected an (N, H, W) stack, got shape {stack.shape}")
    planes, h, w = stack.shape
    header = STACK_MAGIC + struct.pack("<III", h, w, planes)
    Path(path).write_bytes(header + stack.astype("<f4").tobytes())


def read_model(path) -> PredictorParams:
    data = Path(path).read_bytes()
    if data[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    n_features, n_classes = struct.unpack("<II", data[4:12])
    if n_features < 1 or n_classes < 1:
        raise FormatError(f"{path}: bad dimensions {n_features}x{n_classes}")
    expected = 12 + (n_features * n_classes + n_classes) * 8
    if len(data) != expected:
        raise FormatError(f"{path}: payload size mismatch")
    body = np.frombuffer(data[12:], dtype="<f8")
    weights = body[: n_features * n_classes].reshape(n_features, n_classes)
    bias = body[n_features * n_classes:]
    return PredictorParams(weights.copy(), bias.copy())


def write_model(path, params: PredictorParams) -> None:
    header = MODEL_MAGIC + struct.pack("<II", params.n_features, params.n_classes)
    body = params.weights.astype("<f8").tobytes() + params.bias.astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


@dataclass(frozen=True)
class RunConfig:
    """Flat bag of run knobs shared by the CLI subcommands.

    rho applies to confidence-driven (deep) evolution, rho_classic to
    log-likelihood-driven (classic) evolution; they live on different
    scales.
    """

    epsilon: float = 1.0
    rho: float = 0.5
    rho_classic: float = -10.0
    dt: float = 0.2
    iters: int = 200
    stop_frac: float = 1e-4
    reinit_every: int = 50
    steps: int = 4
    lr: float = 0.01
    decay: float = 0.0005
    momentum: float = 0.9
    epochs: int = 40

    def evolution(self, mode: str = "deep") -> EvolutionConfig:
        rho = self.rho if mode == "deep" else self.rho_classic
        return EvolutionConfig(
            epsilon=self.epsilon,
            rho=rho,
            dt=self.dt,
            max_iters=self.iters,
            stop_frac=self.stop_frac,
            reinit_every=self.reinit_every,
        )

    def training(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            weight_decay=self.decay,
            momentum=self.momentum,
            epochs=self.epochs,
            steps=self.steps,
        )


_INT_KEYS = {"iters", "reinit_every", "steps", "epochs"}


def parse_config(path) -> RunConfig:
    """Parse `key = value` lines; unknown keys are rejected by line number."""
    known = {f.name for f in dc_fields(RunConfig)}
    overrides: dict[str, float | int] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            overrides[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return RunConfig(**overrides)
