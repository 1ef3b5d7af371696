"""Multiphase level-set evolution: partition, speeds, regulariser, driver.

One level-set plane is kept per class and the label map is the
per-pixel argmin over planes, which makes the partition total by
construction: no pixel is ever claimed by two classes or by none.
Fronts move under

    d(phi_i)/dt = -(F_i - eps * K_i) |grad phi_i|

where F_i is a class-likelihood speed and K_i couples the planes
through the mean projection matrix of their unit normals.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dtrans import init_phi
from .fields import (
    GRAD_FLOOR,
    as_stack,
    divergence,
    gradient_central,
    one_hot,
    require_finite,
    upwind_grad_mag,
)
from .region import fit_regions, loglik

# Classic-mode speeds are clamped here. Fitted variances near the floor
# (and the empty-region sentinel) produce log-likelihood gaps of 1e3 and
# beyond; uncapped they would drag the stable step size toward zero for
# the whole grid while moving fronts no faster, since per-step front
# displacement is bounded by the CFL condition anyway.
SPEED_CAP = 25.0

# A single explicit Euler step moving any phi value by more than this is
# taken as a blown-up integration rather than a meaningful update.
INSTABILITY_LIMIT = 10.0

# labels -> (N, H, W) speed stack for the current partition
SpeedFn = Callable[[np.ndarray], np.ndarray]


class EvolutionInstability(RuntimeError):
    """Raised when an evolution step jumps by more than INSTABILITY_LIMIT."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Knobs for one evolution run.

    dt is an upper bound; each iteration also respects the stability
    bound 0.5 / (max|F| + 4 eps). max_iters 0 requests no evolution at
    all, reinit_every 0 disables re-initialisation.
    """

    epsilon: float = 1.0
    rho: float = 0.5
    dt: float = 0.2
    max_iters: int = 200
    stop_frac: float = 1e-4
    reinit_every: int = 50

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0.0 <= self.stop_frac < 1.0:
            raise ValueError("stop_frac must lie in [0, 1)")
        if self.reinit_every < 0:
            raise ValueError("reinit_every must be >= 0")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    changed_frac: float
    max_dphi: float


@dataclass
class EvolutionTrace:
    records: list[TraceRecord] = field(default_factory=list)
    snapshots: list = field(default_factory=list)


def assign(phi: np.ndarray) -> np.ndarray:
    """Label map as the per-pixel argmin over planes, ties to the lowest index."""
    phi = as_stack(phi)
    return np.argmin(phi, axis=0).astype(np.int64)


def _rival_max(stack: np.ndarray, i: int) -> np.ndarray:
    others = [stack[j] for j in range(stack.shape[0]) if j != i]
    if not others:
        return np.full(stack.shape[1:], -np.inf)
    return np.max(np.stack(others), axis=0)


def speed_deep(scores: np.ndarray, rho: float = 0.5) -> np.ndarray:
    """F_i = S_i - max(rho, max_{j != i} S_j) on raw confidences.

    The threshold keeps all fronts retreating wherever no class is
    confident, instead of letting the least bad class swallow the area.
    """
    scores = as_stack(scores)
    out = np.empty_like(scores)
    for i in range(scores.shape[0]):
        out[i] = scores[i] - np.maximum(rho, _rival_max(scores, i))
    return out


def speed_classic(loglik_planes: np.ndarray, rho: float = -10.0) -> np.ndarray:
    """Same competition as speed_deep but on log-likelihood planes.

    The result is clamped to +-SPEED_CAP; the clamp preserves the sign
    and zero set of the speed, which is all that determines where fronts
    settle.
    """
    planes = as_stack(loglik_planes)
    require_finite(planes, "log-likelihood planes")
    out = np.empty_like(planes)
    for i in range(planes.shape[0]):
        out[i] = planes[i] - np.maximum(rho, _rival_max(planes, i))
    return np.clip(out, -SPEED_CAP, SPEED_CAP)


def regularizer(phi: np.ndarray) -> np.ndarray:
    """K_i = div(M n_i) with M the mean outer product of all unit normals.

    For a single plane M n = n up to the gradient floor, so K reduces to
    mean curvature div(grad phi / |grad phi|).
    """
    phi = as_stack(phi)
    n = phi.shape[0]
    nx = np.empty_like(phi)
    ny = np.empty_like(phi)
    for i in range(n):
        ux, uy = gradient_central(phi[i])
        mag = np.maximum(np.sqrt(ux * ux + uy * uy), GRAD_FLOOR)
        nx[i] = ux / mag
        ny[i] = uy / mag
    mxx = np.mean(nx * nx, axis=0)
    mxy = np.mean(nx * ny, axis=0)
    myy = np.mean(ny * ny, axis=0)
    out = np.empty_like(phi)
    for i in range(n):
        out[i] = divergence((mxx * nx[i] + mxy * ny[i], mxy * nx[i] + myy * ny[i]))
    return out


def evolve_step(phi: np.ndarray, speed: np.ndarray, cfg: EvolutionConfig) -> np.ndarray:
    """One explicit Euler step of all planes under speed - eps * K."""
    phi = as_stack(phi)
    speed = as_stack(speed)
    if phi.shape != speed.shape:
        raise ValueError("phi and speed stacks differ in shape")
    kappa = regularizer(phi) if cfg.epsilon > 0 else None
    out = np.empty_like(phi)
    for i in range(phi.shape[0]):
        g = speed[i] if kappa is None else speed[i] - cfg.epsilon * kappa[i]
        out[i] = phi[i] - cfg.dt * g * upwind_grad_mag(phi[i], g)
    jump = float(np.max(np.abs(out - phi)))
    if not np.isfinite(jump) or jump > INSTABILITY_LIMIT:
        raise EvolutionInstability(
            f"step moved phi by {jump:.3g} (> {INSTABILITY_LIMIT}); reduce dt"
        )
    require_finite(out, "evolved phi")
    return out


def stable_dt(speed: np.ndarray, epsilon: float, dt_max: float) -> float:
    """Largest step not exceeding dt_max that satisfies 0.5/(max|F| + 4 eps)."""
    denom = float(np.max(np.abs(speed))) + 4.0 * epsilon
    if denom <= 0.0:
        return dt_max
    return min(dt_max, 0.5 / denom)


def deep_speed(scores: np.ndarray, rho: float = 0.5) -> SpeedFn:
    """Speed source for confidence-driven evolution; static across iterations."""
    static = speed_deep(scores, rho)

    def fn(labels: np.ndarray) -> np.ndarray:
        return static

    return fn


def classic_speed(image: np.ndarray, n_classes: int, rho: float = -10.0) -> SpeedFn:
    """Speed source refitting per-class Gaussians to the current partition."""
    image = as_stack(image)

    def fn(labels: np.ndarray) -> np.ndarray:
        return speed_classic(loglik(image, fit_regions(image, labels, n_classes)), rho)

    return fn


def evolve(
    phi0: np.ndarray,
    speed_fn: SpeedFn,
    cfg: EvolutionConfig,
    frame_cb: Callable[[int, np.ndarray, np.ndarray], object] | None = None,
) -> tuple[np.ndarray, EvolutionTrace]:
    """Run the evolution until labels settle or max_iters is reached.

    Stops once the fraction of pixels that changed label in an iteration
    drops below stop_frac. Every reinit_every iterations the planes are
    rebuilt as signed distances to the current partition, which keeps
    gradient magnitudes meaningful over long runs. frame_cb, when given,
    is called with (iteration, phi, labels) after the initial state and
    after every iteration; non-None return values are collected as
    snapshots in the trace.
    """
    phi = as_stack(phi0).copy()
    require_finite(phi, "initial phi")
    n = phi.shape[0]
    labels = assign(phi)
    trace = EvolutionTrace()

    def snap(iteration: int) -> None:
        if frame_cb is not None:
            handle = frame_cb(iteration, phi, labels)
            if handle is not None:
                trace.snapshots.append(handle)

    snap(0)
    for it in range(1, cfg.max_iters + 1):
        speed = speed_fn(labels)
        step_cfg = replace(cfg, dt=stable_dt(speed, cfg.epsilon, cfg.dt))
        new_phi = evolve_step(phi, speed, step_cfg)
        max_dphi = float(np.max(np.abs(new_phi - phi)))
        phi = new_phi
        new_labels = assign(phi)
        changed = float(np.mean(new_labels != labels))
        labels = new_labels
        trace.records.append(TraceRecord(it, changed, max_dphi))
        snap(it)
        if changed < cfg.stop_frac:
            break
        if cfg.reinit_every and it % cfg.reinit_every == 0 and it < cfg.max_iters:
            phi = init_phi(one_hot(labels, n))
    return phi, trace


# image, labels-or-None -> (N, H, W) confidence stack
Predictor = Callable[[np.ndarray, np.ndarray | None], np.ndarray]


def refine(
    image: np.ndarray,
    predictor: Predictor,
    steps: int,
    cfg: EvolutionConfig,
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Alternate coarse prediction and level-set refinement.

    The predictor first runs on the image alone; each step initialises
    planes from the current scores, evolves them and hands the refined
    labels back to the predictor. Returns the final label map and the
    per-step (scores, labels) pairs, one pair per step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    scores = as_stack(predictor(image, None))
    history: list[tuple[np.ndarray, np.ndarray]] = []
    labels = None
    for k in range(steps):
        phi = init_phi(scores)
        phi, _ = evolve(phi, deep_speed(scores, cfg.rho), cfg)
        labels = assign(phi)
        history.append((scores, labels))
        if k + 1 < steps:
            scores = as_stack(predictor(image, labels))
    return labels, history
