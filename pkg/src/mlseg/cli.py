"""Command-line surface: synth | evolve | refine | train | eval | edt.

Every subcommand is deterministic: identical argv plus identical input
files produce identical output bytes. MLS_THREADS caps worker threads
for the per-image fan-out in synth and eval (default: available cores).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dtrans, io, metrics, mls, synth
from .learner import CoarsePredictor, train as train_learner


def _threads() -> int:
    raw = os.environ.get("MLS_THREADS", "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise ValueError("MLS_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _config(path: str | None) -> io.RunConfig:
    return io.parse_config(path) if path else io.RunConfig()


def _scene_paths(out_dir: Path, index: int) -> tuple[Path, Path]:
    return out_dir / f"scene_{index:03d}.ppm", out_dir / f"scene_{index:03d}.pgm"


def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = synth.SceneSpec(
        size=args.size, n_classes=args.classes, noise_sigma=args.noise
    )

    def emit(index: int) -> None:
        scene = replace(spec, seed=synth.derive_seed(args.seed, index))
        image, gt = synth.generate(scene)
        img_path, gt_path = _scene_paths(out_dir, index)
        io.write_ppm(img_path, image)
        io.write_labels(gt_path, gt, args.classes)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        list(pool.map(emit, range(args.count)))
    return 0


def _frame_writer(dump_dir: Path, n_classes: int):
    dump_dir.mkdir(parents=True, exist_ok=True)

    def cb(iteration: int, phi: np.ndarray, labels: np.ndarray):
        label_path = dump_dir / f"labels_{iteration:04d}.pgm"
        phi_path = dump_dir / f"phi_{iteration:04d}.mls1"
        io.write_labels(label_path, labels, n_classes)
        io.write_scores(phi_path, phi)
        return label_path

    return cb


def _cmd_evolve(args) -> int:
    cfg = _config(args.config)
    scores = io.read_scores(args.scores)
    image = io.read_ppm(args.image)
    if scores.shape[1:] != image.shape[1:]:
        raise ValueError("scores and image differ in spatial shape")
    n_classes = scores.shape[0]
    evo = cfg.evolution(args.mode)
    if args.mode == "deep":
        speed_fn = mls.deep_speed(scores, evo.rho)
    else:
        speed_fn = mls.classic_speed(image, n_classes, evo.rho)
    frame_cb = _frame_writer(Path(args.dump_frames), n_classes) if args.dump_frames else None
    phi = dtrans.init_phi(scores)
    phi, _ = mls.evolve(phi, speed_fn, evo, frame_cb)
    io.write_labels(args.out, mls.assign(phi), n_classes)
    return 0


def _cmd_refine(args) -> int:
    cfg = _config(args.config)
    image = io.read_ppm(args.image)
    predictor = CoarsePredictor(io.read_model(args.model))
    steps = args.steps if args.steps is not None else cfg.steps
    labels, _ = mls.refine(image, predictor, steps, cfg.evolution("deep"))
    io.write_labels(args.out, labels, predictor.params.n_classes)
    return 0


def _load_pairs(data_dir: Path) -> list[tuple[np.ndarray, np.ndarray]]:
    pairs = []
    for img_path in sorted(data_dir.glob("*.ppm")):
        gt_path = img_path.with_suffix(".pgm")
        if not gt_path.exists():
            raise FileNotFoundError(f"no label map next to {img_path}")
        pairs.append((io.read_ppm(img_path), io.read_labels(gt_path)))
    if not pairs:
        raise FileNotFoundError(f"no .ppm files in {data_dir}")
    return pairs


def _cmd_train(args) -> int:
    cfg = _config(args.config)
    dataset = _load_pairs(Path(args.data))
    params = train_learner(dataset, cfg.training(), cfg.evolution("deep"))
    io.write_model(args.out, params)
    return 0


def _cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(p.name for p in pred_dir.glob("*.pgm"))
    if not names:
        raise FileNotFoundError(f"no .pgm files in {pred_dir}")

    def pair_confusion(name: str) -> np.ndarray:
        pred = io.read_labels(pred_dir / name, args.classes)
        gt = io.read_labels(gt_dir / name, args.classes)
        return metrics.confusion(pred, gt, args.classes)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        counts = sum(pool.map(pair_confusion, names))
    sys.stdout.write(metrics.report(counts))
    return 0


def _cmd_edt(args) -> int:
    mask = io.read_labels(args.mask) > 0
    io.write_scores(args.out, dtrans.edt(mask)[None])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlseg",
        description="Multiphase level-set refinement of multi-class score maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="write synthetic (image, gt) scene pairs",
                       formatter_class=fmt)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=20, help="number of scenes")
    p.add_argument("--size", type=int, default=64, help="scene side length")
    p.add_argument("--classes", type=int, default=4, help="number of classes")
    p.add_argument("--noise", type=float, default=0.1, help="noise sigma")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("evolve", help="run one level-set evolution on a score stack",
                       formatter_class=fmt)
    p.add_argument("--image", required=True, help="input PPM image")
    p.add_argument("--scores", required=True, help="input MLS1 score stack")
    p.add_argument("--mode", choices=("classic", "deep"), default="deep",
                   help="speed model")
    p.add_argument("--config", default=None, help="run configuration file")
    p.add_argument("--out", required=True, help="output PGM label map")
    p.add_argument("--dump-frames", default=None,
                   help="directory for per-iteration label/phi dumps")
    p.set_defaults(fn=_cmd_evolve)

    p = sub.add_parser("refine", help="recurrent predict + refine with a trained model",
                       formatter_class=fmt)
    p.add_argument("--image", required=True, help="input PPM image")
    p.add_argument("--model", required=True, help="trained MLSW model file")
    p.add_argument("--steps", type=int, default=None,
                   help="refinement steps (default: config value)")
    p.add_argument("--config", default=None, help="run configuration file")
    p.add_argument("--out", required=True, help="output PGM label map")
    p.set_defaults(fn=_cmd_refine)

    p = sub.add_parser("train", help="train the coarse predictor with deep supervision",
                       formatter_class=fmt)
    p.add_argument("--data", required=True,
                   help="directory of scene_*.ppm with matching .pgm labels")
    p.add_argument("--config", default=None, help="run configuration file")
    p.add_argument("--out", required=True, help="output MLSW model file")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="print the metrics report for two label directories",
                       formatter_class=fmt)
    p.add_argument("--pred", required=True, help="directory of predicted PGMs")
    p.add_argument("--gt", required=True, help="directory of ground-truth PGMs")
    p.add_argument("--classes", type=int, required=True, help="number of classes")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("edt", help="distance transform of a mask (debug aid)",
                       formatter_class=fmt)
    p.add_argument("--mask", required=True, help="PGM mask, nonzero = inside")
    p.add_argument("--out", required=True, help="output single-plane MLS1 file")
    p.set_defaults(fn=_cmd_edt)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
