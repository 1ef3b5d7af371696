"""Recurrent coarse predictor: per-pixel linear softmax with label feedback.

The predictor is a deliberately small stand-in for a dense network. Its
features are the raw image channels, a box-smoothed copy of each
channel, one prior plane per class carrying the previous prediction
(uniform when there is none) and a constant bias plane. Training unrolls
a few prediction / refinement rounds per example and supervises every
round; gradients flow through the prediction only, the level-set
refinement in between is treated as a fixed label source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtrans import init_phi
from .fields import as_stack, box_mean, one_hot
from .metrics import boundary_mask, class_frequencies
from .mls import EvolutionConfig, assign, deep_speed, evolve

LOG_FLOOR = 1e-12
SMOOTH_RADIUS = 2


class TrainingDivergence(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class PredictorParams:
    weights: np.ndarray  # (n_features, n_classes)
    bias: np.ndarray     # (n_classes,)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.weights.copy(), self.bias.copy())


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.0005
    momentum: float = 0.9
    epochs: int = 40
    steps: int = 4
    per_step_loss_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.per_step_loss_weights is not None:
            w = self.per_step_loss_weights
            if len(w) != self.steps or any(x < 0 for x in w):
                raise ValueError("need one nonnegative loss weight per step")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("per-step loss weights must sum to 1")

    def step_weights(self) -> np.ndarray:
        if self.per_step_loss_weights is None:
            return np.full(self.steps, 1.0 / self.steps)
        return np.asarray(self.per_step_loss_weights, dtype=np.float64)


def feature_count(n_channels: int, n_classes: int) -> int:
    return 2 * n_channels + n_classes + 1


def extract_features(
    image: np.ndarray, n_classes: int, prior: np.ndarray | None = None
) -> np.ndarray:
    """Stack raw channels, smoothed channels, prior planes and a 1-plane.

    Without a prior the class planes are filled with 1/n_classes.
    """
    image = as_stack(image)
    c, h, w = image.shape
    if prior is None:
        prior = np.full((n_classes, h, w), 1.0 / n_classes)
    else:
        prior = as_stack(prior)
        if prior.shape != (n_classes, h, w):
            raise ValueError("prior shape does not match image and n_classes")
    feats = np.empty((feature_count(c, n_classes), h, w), dtype=np.float64)
    feats[:c] = image
    for ch in range(c):
        feats[c + ch] = box_mean(image[ch], SMOOTH_RADIUS)
    feats[2 * c:2 * c + n_classes] = prior
    feats[-1] = 1.0
    return feats


def init_params(n_channels: int, n_classes: int) -> PredictorParams:
    d = feature_count(n_channels, n_classes)
    return PredictorParams(np.zeros((d, n_classes)), np.zeros(n_classes))


def predict(features: np.ndarray, params: PredictorParams) -> np.ndarray:
    """Per-pixel softmax over linear class scores."""
    features = as_stack(features)
    if features.shape[0] != params.n_features:
        raise ValueError("feature count does not match parameters")
    logits = np.einsum("dhw,dn->nhw", features, params.weights)
    logits += params.bias[:, None, None]
    logits -= logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=0, keepdims=True)


def class_weights(gt: np.ndarray, n_classes: int, frequencies: np.ndarray) -> np.ndarray:
    """Median-frequency pixel weights plus 1 on label boundaries.

    A pixel of class c weighs median(frequencies) / frequencies[c];
    pixels with a different 4-neighbour label get an extra unit so thin
    structures are not drowned out by large regions.
    """
    gt = np.asarray(gt)
    frequencies = np.asarray(frequencies, dtype=np.float64)
    if frequencies.shape != (n_classes,):
        raise ValueError("need one frequency per class")
    med = float(np.median(frequencies))
    w = med / frequencies[gt]
    return w + boundary_mask(gt).astype(np.float64)


def wce_loss(
    scores: np.ndarray,
    gt: np.ndarray,
    weights: np.ndarray,
    params: PredictorParams,
    decay: float,
) -> float:
    """Weighted cross entropy, mean over pixels, plus decay * ||W||^2."""
    scores = as_stack(scores)
    gt = np.asarray(gt)
    p_true = np.take_along_axis(scores, gt[None], axis=0)[0]
    data = -np.mean(weights * np.log(np.maximum(p_true, LOG_FLOOR)))
    return float(data + decay * np.sum(params.weights ** 2))


def wce_grad(
    scores: np.ndarray,
    gt: np.ndarray,
    weights: np.ndarray,
    features: np.ndarray,
    params: PredictorParams,
    decay: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of wce_loss wrt weights and bias."""
    scores = as_stack(scores)
    n, h, w = scores.shape
    delta = (scores - one_hot(np.asarray(gt), n)) * weights[None]
    delta /= float(h * w)
    g_w = np.einsum("dhw,nhw->dn", features, delta) + 2.0 * decay * params.weights
    g_b = delta.sum(axis=(1, 2))
    return g_w, g_b


class CoarsePredictor:
    """Callable (image, labels-or-None) -> confidence stack."""

    def __init__(self, params: PredictorParams):
        self.params = params

    def __call__(self, image: np.ndarray, labels: np.ndarray | None = None) -> np.ndarray:
        n = self.params.n_classes
        prior = None if labels is None else one_hot(labels, n)
        return predict(extract_features(image, n, prior), self.params)


def train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
    evo: EvolutionConfig,
    on_epoch=None,
) -> PredictorParams:
    """Momentum SGD over (image, gt) pairs with deep supervision.

    Each example is unrolled cfg.steps times: predict, accumulate the
    step's weighted loss gradient, refine the prediction with a
    level-set pass and feed the refined labels back as the next prior.
    Parameters are updated once per example. on_epoch, when given, is
    called with (epoch, mean_loss) after every epoch.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    n_classes = int(max(int(np.max(gt)) for _, gt in dataset)) + 1
    if n_classes < 2:
        raise ValueError("need at least two classes in the ground truth")
    n_channels = as_stack(dataset[0][0]).shape[0]
    freqs = class_frequencies([gt for _, gt in dataset], n_classes)

    params = init_params(n_channels, n_classes)
    vel_w = np.zeros_like(params.weights)
    vel_b = np.zeros_like(params.bias)
    step_w = cfg.step_weights()

    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        for image, gt in dataset:
            image = as_stack(image)
            gt = np.asarray(gt)
            pix_w = class_weights(gt, n_classes, freqs)
            g_w = np.zeros_like(params.weights)
            g_b = np.zeros_like(params.bias)
            example_loss = 0.0
            prior = None
            for k in range(cfg.steps):
                feats = extract_features(image, n_classes, prior)
                scores = predict(feats, params)
                example_loss += step_w[k] * wce_loss(
                    scores, gt, pix_w, params, cfg.weight_decay
                )
                dw, db = wce_grad(scores, gt, pix_w, feats, params, cfg.weight_decay)
                g_w += step_w[k] * dw
                g_b += step_w[k] * db
                if k + 1 < cfg.steps:
                    phi = init_phi(scores)
                    phi, _ = evolve(phi, deep_speed(scores, evo.rho), evo)
                    prior = one_hot(assign(phi), n_classes)
            if not np.isfinite(example_loss):
                raise TrainingDivergence(f"loss became {example_loss} in epoch {epoch}")
            vel_w = cfg.momentum * vel_w - cfg.learning_rate * g_w
            vel_b = cfg.momentum * vel_b - cfg.learning_rate * g_b
            params.weights += vel_w
            params.bias += vel_b
            epoch_loss += example_loss
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss / len(dataset))
    return params
