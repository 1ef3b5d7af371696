"""Deterministic synthetic desk-scale scenes: colored shapes on a background.

The generator must produce identical scenes for identical seeds on any
platform, so it uses its own counter-based splitmix mixer instead of a
library RNG whose stream is free to change between releases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)

# Base colors; every pair differs by at least 0.3 in some channel, so a
# per-pixel linear classifier can always separate the classes.
PALETTE = (
    (0.10, 0.10, 0.10),
    (0.90, 0.20, 0.20),
    (0.20, 0.90, 0.20),
    (0.20, 0.20, 0.90),
    (0.90, 0.90, 0.20),
    (0.90, 0.20, 0.90),
    (0.20, 0.90, 0.90),
    (0.60, 0.60, 0.60),
    (0.90, 0.55, 0.20),
    (0.55, 0.20, 0.90),
)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


class RandomStream:
    """Counter-based splitmix stream of 64-bit words."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def raw(self, count: int) -> np.ndarray:
        k = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            return _mix(self._seed + k * _GOLDEN)

    def uniform(self, count: int) -> np.ndarray:
        """count doubles in [0, 1)."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, count: int) -> np.ndarray:
        """count standard normals via the Box-Muller transform."""
        pairs = (count + 1) // 2
        u1 = 1.0 - self.uniform(pairs)  # (0, 1], keeps the log finite
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:count]

    def integer(self, lo: int, hi: int) -> int:
        """One draw from [lo, hi); modulo bias is irrelevant at these ranges."""
        if hi <= lo:
            raise ValueError("empty range")
        return lo + int(self.raw(1)[0] % np.uint64(hi - lo))


def derive_seed(master: int, index: int) -> int:
    """Stable per-item seed for fan-out over a dataset."""
    with np.errstate(over="ignore"):
        z = np.uint64(master & 0xFFFFFFFFFFFFFFFF) + np.uint64(index + 1) * _GOLDEN
    return int(_mix(np.array([z], dtype=np.uint64))[0])


@dataclass(frozen=True)
class SceneSpec:
    size: int = 64
    n_classes: int = 4
    shapes_per_class: int = 2
    noise_sigma: float = 0.1
    seed: int = 0
    flip: bool = False

    def __post_init__(self):
        if self.size < 32:
            raise ValueError("size must be >= 32")
        if not 2 <= self.n_classes <= len(PALETTE):
            raise ValueError(f"n_classes must lie in [2, {len(PALETTE)}]")
        if self.shapes_per_class < 0:
            raise ValueError("shapes_per_class must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _paint(gt: np.ndarray, rng: RandomStream, cls: int, size: int) -> None:
    lo = max(3, size // 10)
    hi = max(lo + 1, size // 4)
    kind = rng.integer(0, 2)
    cx = rng.integer(0, size)
    cy = rng.integer(0, size)
    if kind == 0:
        a = rng.integer(lo, hi)
        b = rng.integer(lo, hi)
        gt[max(0, cy - b):cy + b + 1, max(0, cx - a):cx + a + 1] = cls
    else:
        r = rng.integer(lo, hi)
        yy, xx = np.ogrid[:size, :size]
        gt[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = cls


def _render(gt: np.ndarray, spec: SceneSpec, rng: RandomStream) -> np.ndarray:
    size = spec.size
    colors = np.asarray(PALETTE[: spec.n_classes])
    image = colors[gt].transpose(2, 0, 1).astype(np.float64)
    if spec.noise_sigma > 0:
        noise = rng.normal(3 * size * size).reshape(3, size, size)
        image = image + spec.noise_sigma * noise
    return np.clip(image, 0.0, 1.0)


def _generate(spec: SceneSpec, skip_last: bool) -> tuple[np.ndarray, np.ndarray]:
    rng = RandomStream(spec.seed)
    gt = np.zeros((spec.size, spec.size), dtype=np.int64)
    top = spec.n_classes - 1 if skip_last else spec.n_classes
    for cls in range(1, top):  # painted in order, later classes on top
        for _ in range(spec.shapes_per_class):
            _paint(gt, rng, cls, spec.size)
    image = _render(gt, spec, rng)
    if spec.flip:
        image = image[:, :, ::-1].copy()
        gt = gt[:, ::-1].copy()
    return image, gt


def generate(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """One (image, gt) pair; class 0 is the background."""
    return _generate(spec, skip_last=False)


def generate_void_case(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Scene whose last class is deliberately absent from the ground truth."""
    if spec.n_classes < 3:
        raise ValueError("a void case needs at least 3 classes")
    return _generate(spec, skip_last=True)


def dataset(
    master_seed: int, count: int, spec: SceneSpec
) -> list[tuple[np.ndarray, np.ndarray]]:
    """count scenes with per-scene seeds derived from one master seed."""
    return [
        generate(replace(spec, seed=derive_seed(master_seed, i)))
        for i in range(count)
    ]
