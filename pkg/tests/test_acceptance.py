"""Full-scale checks of the advertised engine behavior.

Everything here runs the public surface the way a user would: library
calls at realistic sizes plus complete CLI pipelines. The two heavy
pipelines (classic-mode recovery of corrupted scenes, recurrent
training with held-out evaluation) execute once as module fixtures and
several checks read their results, including the stability audit.
"""

import time

import numpy as np
import pytest

from mlseg import io
from mlseg.cli import run
from mlseg.dtrans import edt_squared, init_phi
from mlseg.fields import divergence, gradient_central, one_hot
from mlseg.learner import (
    CoarsePredictor,
    PredictorParams,
    TrainConfig,
    class_weights,
    predict,
    train,
    wce_grad,
    wce_loss,
)
from mlseg.metrics import (
    boundary_mask,
    class_frequencies,
    confusion,
    iou_per_class,
    mean_iou,
    pixel_accuracy,
)
from mlseg.mls import INSTABILITY_LIMIT, assign, classic_speed, evolve, refine, regularizer
from mlseg.synth import RandomStream, SceneSpec, dataset, derive_seed, generate_void_case

N_HEAVY_SCENES = 20
FLIP_FRACTION = 0.2


def flip_labels(gt, n_classes, fraction, seed):
    """Reassign a fraction of pixels to a uniformly chosen other class."""
    stream = RandomStream(seed)
    h, w = gt.shape
    hit = stream.uniform(h * w).reshape(h, w) < fraction
    offs = 1 + np.floor(
        stream.uniform(h * w).reshape(h, w) * (n_classes - 1)
    ).astype(np.int64)
    return np.where(hit, (gt + offs) % n_classes, gt)


@pytest.fixture(scope="module")
def classic_recovery():
    """Classic-mode evolution on corrupted one-hot starts, full scale."""
    spec = SceneSpec(size=128, n_classes=4, noise_sigma=0.1)
    cfg = io.RunConfig().evolution("classic")
    results = []
    for k, (image, gt) in enumerate(dataset(301, N_HEAVY_SCENES, spec)):
        corrupt = flip_labels(gt, 4, FLIP_FRACTION, derive_seed(777, k))
        scores = one_hot(corrupt, 4)
        phi = init_phi(scores)
        begin = time.perf_counter()
        phi, trace = evolve(phi, classic_speed(image, 4, cfg.rho), cfg)
        elapsed = time.perf_counter() - begin
        final = assign(phi)
        results.append({
            "corrupt_miou": mean_iou(confusion(corrupt, gt, 4)),
            "final_miou": mean_iou(confusion(final, gt, 4)),
            "seconds": elapsed,
            "trace": trace,
            "finite": bool(np.isfinite(phi).all()),
        })
    return results


@pytest.fixture(scope="module")
def recurrent_training():
    """Train the coarse predictor and refine a held-out set, full scale."""
    spec = SceneSpec(size=64, n_classes=4, noise_sigma=0.1)
    train_set = dataset(101, 50, spec)
    held_out = dataset(202, 20, spec)
    train_cfg = TrainConfig()
    evo = io.RunConfig().evolution("deep")

    begin = time.perf_counter()
    params = train(train_set, train_cfg, evo)
    predictor = CoarsePredictor(params)
    step_counts = [np.zeros((4, 4), dtype=np.int64) for _ in range(train_cfg.steps)]
    all_finite = True
    for image, gt in held_out:
        labels, history = refine(image, predictor, train_cfg.steps, evo)
        for k, (scores, step_labels) in enumerate(history):
            all_finite &= bool(np.isfinite(scores).all())
            step_counts[k] += confusion(step_labels, gt, 4)
    elapsed = time.perf_counter() - begin
    return {
        "step_miou": [mean_iou(c) for c in step_counts],
        "seconds": elapsed,
        "finite": all_finite,
    }


def test_partition_assignment_at_scale():
    rng = np.random.default_rng(80)
    begin = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        h, w = (int(x) for x in rng.integers(1, 33, size=2))
        phi = rng.normal(size=(n, h, w))
        labels = assign(phi)
        counts = np.bincount(labels.ravel(), minlength=n)
        assert counts.sum() == h * w
        assert labels.min() >= 0 and labels.max() < n
        shift = float(rng.normal() * 50)
        assert np.array_equal(assign(phi + shift), labels)
        for i in range(h):
            for j in range(w):
                best = 0
                for k in range(1, n):
                    if phi[k, i, j] < phi[best, i, j]:
                        best = k
                assert labels[i, j] == best
    elapsed = time.perf_counter() - begin
    print(f"partition assignment: 1000 stacks in {elapsed:.2f}s")
    assert elapsed < 5.0


def test_distance_transform_exactness_at_scale():
    rng = np.random.default_rng(81)
    begin = time.perf_counter()
    for _ in range(200):
        h, w = (int(x) for x in rng.integers(1, 65, size=2))
        mask = rng.random((h, w)) < rng.uniform(0.02, 0.95)
        got = edt_squared(mask)
        ys, xs = np.nonzero(mask)
        if len(ys) == 0:
            expected = np.full((h, w), max(h, w) ** 2, dtype=np.int64)
        else:
            yy, xx = np.mgrid[:h, :w]
            d2 = (yy.reshape(-1, 1) - ys) ** 2 + (xx.reshape(-1, 1) - xs) ** 2
            expected = d2.min(axis=1).reshape(h, w)
        assert np.array_equal(got, expected)
    elapsed = time.perf_counter() - begin
    print(f"distance transform: 200 masks in {elapsed:.2f}s")
    assert elapsed < 10.0


def test_regularizer_reduces_to_curvature_on_smooth_fields():
    rng = np.random.default_rng(82)
    for _ in range(50):
        h, w = (int(x) for x in rng.integers(12, 40, size=2))
        yy, xx = np.mgrid[:h, :w].astype(np.float64)
        phi = (
            rng.uniform(0.5, 2.0) * xx
            + rng.uniform(0.5, 2.0) * yy
            + 0.2 * np.sin(xx / rng.uniform(3, 8)) * np.sin(yy / rng.uniform(3, 8))
        )
        ux, uy = gradient_central(phi)
        mag = np.maximum(np.hypot(ux, uy), 1e-8)
        expected = divergence((ux / mag, uy / mag))
        assert np.allclose(regularizer(phi[None])[0], expected, atol=1e-8)


def test_regularizer_recovers_circle_curvature():
    h = w = 64
    r = 16.0
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    dist = np.hypot(yy - 32.0, xx - 32.0) - r
    k = regularizer((dist / max(h, w))[None])[0]
    near = np.abs(dist) <= 1.0
    worst = float(np.abs(k[near] - 1.0 / r).max() * r)
    print(f"circle curvature: worst relative error {worst:.3f}")
    assert worst < 0.10


def test_uniform_loss_equals_log_class_count():
    rng = np.random.default_rng(83)
    for n in range(2, 7):
        h, w = (int(x) for x in rng.integers(4, 20, size=2))
        gt = rng.integers(0, n, size=(h, w))
        scores = np.full((n, h, w), 1.0 / n)
        params = PredictorParams(np.zeros((5, n)), np.zeros(n))
        loss = wce_loss(scores, gt, np.ones((h, w)), params, 0.0)
        assert loss == pytest.approx(np.log(n), abs=1e-10)


def test_gradient_matches_finite_differences_across_problems():
    rng = np.random.default_rng(84)
    step = 1e-6
    for _ in range(5):
        d = int(rng.integers(3, 7))
        n = int(rng.integers(2, 5))
        h, w = (int(x) for x in rng.integers(4, 9, size=2))
        feats = rng.random((d, h, w))
        gt = rng.integers(0, n, size=(h, w))
        weights = rng.random((h, w)) + 0.5
        params = PredictorParams(rng.normal(size=(d, n)) * 0.4, rng.normal(size=n) * 0.4)
        decay = float(rng.uniform(0.0, 0.01))

        def loss_at(p):
            return wce_loss(predict(feats, p), gt, weights, p, decay)

        g_w, g_b = wce_grad(predict(feats, params), gt, weights, feats, params, decay)
        for _ in range(20):
            if rng.random() < 0.8:
                idx = (int(rng.integers(d)), int(rng.integers(n)))
                analytic = g_w[idx]
                up, down = params.copy(), params.copy()
                up.weights[idx] += step
                down.weights[idx] -= step
            else:
                k = int(rng.integers(n))
                analytic = g_b[k]
                up, down = params.copy(), params.copy()
                up.bias[k] += step
                down.bias[k] -= step
            fd = (loss_at(up) - loss_at(down)) / (2 * step)
            assert fd == pytest.approx(analytic, rel=1e-4, abs=1e-8)


def test_frequency_weighting_worked_example():
    gt = np.concatenate([
        np.zeros(50, dtype=np.int64),
        np.ones(30, dtype=np.int64),
        np.full(20, 2, dtype=np.int64),
    ]).reshape(10, 10)
    freqs = class_frequencies([gt], 3)
    assert np.allclose(freqs, [0.5, 0.3, 0.2])
    w = class_weights(gt, 3, freqs)
    interior = ~boundary_mask(gt)
    assert np.allclose(w[interior & (gt == 0)], 0.6)
    assert np.allclose(w[interior & (gt == 1)], 1.0)
    assert np.allclose(w[interior & (gt == 2)], 1.5)
    assert np.allclose(w[~interior], (0.3 / freqs[gt] + 1.0)[~interior])

    even = np.zeros((8, 8), dtype=np.int64)
    even[:, 4:] = 1
    w_even = class_weights(even, 2, class_frequencies([even], 2))
    assert np.allclose(w_even[~boundary_mask(even)], 1.0)


def test_classic_mode_recovers_corrupted_scenes(classic_recovery):
    corrupt = float(np.mean([r["corrupt_miou"] for r in classic_recovery]))
    final = float(np.mean([r["final_miou"] for r in classic_recovery]))
    slowest = max(r["seconds"] for r in classic_recovery)
    print(f"classic recovery: corrupted {corrupt:.3f} -> final {final:.3f}, "
          f"slowest scene {slowest:.2f}s")
    assert final >= corrupt + 0.05
    assert final >= 0.85
    assert slowest < 10.0
    assert all(len(r["trace"].records) <= 200 for r in classic_recovery)


def test_absent_class_never_claims_pixels():
    spec = SceneSpec(size=64, n_classes=4, noise_sigma=0.1)
    cfg = io.RunConfig().evolution("classic")
    for k in range(N_HEAVY_SCENES):
        scene = SceneSpec(
            size=spec.size, n_classes=spec.n_classes,
            noise_sigma=spec.noise_sigma, seed=derive_seed(404, k),
        )
        image, gt = generate_void_case(scene)
        assert (gt == 3).sum() == 0
        # corrupt within the classes that actually occur
        corrupt = flip_labels(gt, 3, FLIP_FRACTION, derive_seed(505, k))
        phi = init_phi(one_hot(corrupt, 4))
        phi, _ = evolve(phi, classic_speed(image, 4, cfg.rho), cfg)
        assert (assign(phi) == 3).sum() == 0


def test_recurrent_refinement_improves_over_steps(recurrent_training):
    miou = recurrent_training["step_miou"]
    print("refinement steps: " + " -> ".join(f"{v:.3f}" for v in miou)
          + f" ({recurrent_training['seconds']:.0f}s)")
    assert miou[-1] >= miou[0]
    assert miou[-1] >= 0.80
    assert recurrent_training["seconds"] < 900.0


def test_evolution_stays_stable_across_heavy_runs(classic_recovery, recurrent_training):
    for r in classic_recovery:
        assert r["finite"]
        for rec in r["trace"].records:
            assert np.isfinite(rec.max_dphi)
            assert rec.max_dphi <= INSTABILITY_LIMIT
    assert recurrent_training["finite"]


def test_metric_definitions_on_random_pairs():
    rng = np.random.default_rng(85)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        h, w = (int(x) for x in rng.integers(2, 21, size=2))
        gt = rng.integers(0, n, size=(h, w))
        pred = rng.integers(0, n, size=(h, w))
        counts = confusion(pred, gt, n)
        assert pixel_accuracy(counts) == pytest.approx(float(np.mean(pred == gt)))
        direct = []
        for c in range(n):
            inter = np.sum((pred == c) & (gt == c))
            union = np.sum((pred == c) | (gt == c))
            if union:
                direct.append(inter / union)
        ious = iou_per_class(counts)
        assert np.allclose(ious[~np.isnan(ious)], direct)
        assert mean_iou(counts) == pytest.approx(float(np.mean(direct)))

    gt = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1]).reshape(2, 5)
    pred = np.array([0, 0, 0, 1, 0, 0, 1, 1, 1, 1]).reshape(2, 5)
    counts = confusion(pred, gt, 2)
    assert np.array_equal(counts, [[3, 1], [2, 4]])
    assert pixel_accuracy(counts) == pytest.approx(0.7)
    assert mean_iou(counts) == pytest.approx(0.5357, abs=5e-5)


def test_cli_pipeline_is_byte_identical(tmp_path):
    outputs = []
    for tag in ("first", "second"):
        root = tmp_path / tag
        data = root / "data"
        pred = root / "pred"
        pred.mkdir(parents=True)
        assert run(["synth", "--out", str(data), "--count", "6", "--size", "32",
                    "--classes", "3", "--seed", "13"]) == 0
        cfg = root / "run.cfg"
        cfg.write_text("epochs = 2\nsteps = 2\niters = 20\n")
        model = root / "model.mlsw"
        assert run(["train", "--data", str(data), "--config", str(cfg),
                    "--out", str(model)]) == 0
        for k in range(2):
            assert run(["refine", "--image", str(data / f"scene_{k:03d}.ppm"),
                        "--model", str(model), "--config", str(cfg),
                        "--out", str(pred / f"scene_{k:03d}.pgm")]) == 0
        gt0 = io.read_labels(data / "scene_000.pgm")
        scores_path = root / "corrupt.mls1"
        io.write_scores(scores_path, one_hot(flip_labels(gt0, 3, 0.2, 99), 3))
        evolved = root / "evolved.pgm"
        assert run(["evolve", "--image", str(data / "scene_000.ppm"),
                    "--scores", str(scores_path), "--mode", "classic",
                    "--config", str(cfg), "--out", str(evolved)]) == 0
        blob = b"".join(
            p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
        )
        outputs.append(blob)
    assert outputs[0] == outputs[1]
