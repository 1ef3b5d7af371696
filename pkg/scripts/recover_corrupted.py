"""Corruption-recovery experiment for the classic speed model.

Generates synthetic scenes, flips a fraction of each ground-truth label
map, and runs the level-set evolution from the corrupted one-hot stack.
Prints per-scene mean IoU before and after, plus the aggregate.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from mlseg import dtrans, io, metrics, mls, synth
from mlseg.fields import one_hot


def flip_labels(gt, n_classes, fraction, seed):
    stream = synth.RandomStream(seed)
    h, w = gt.shape
    hit = stream.uniform(h * w).reshape(h, w) < fraction
    offs = 1 + np.floor(
        stream.uniform(h * w).reshape(h, w) * (n_classes - 1)
    ).astype(np.int64)
    return np.where(hit, (gt + offs) % n_classes, gt)


def frame_writer(dump_dir, n_classes):
    dump_dir.mkdir(parents=True, exist_ok=True)

    def cb(iteration, phi, labels):
        io.write_labels(dump_dir / f"labels_{iteration:04d}.pgm", labels, n_classes)
        io.write_scores(dump_dir / f"phi_{iteration:04d}.mls1", phi)

    return cb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=20)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--flip", type=float, default=0.2, help="corrupted fraction")
    parser.add_argument("--seed", type=int, default=301)
    parser.add_argument("--dump-frames", default=None,
                        help="dump per-iteration frames of the first scene here")
    args = parser.parse_args()

    spec = synth.SceneSpec(size=args.size, n_classes=args.classes,
                           noise_sigma=args.noise)
    scenes = synth.dataset(args.seed, args.scenes, spec)
    cfg = io.RunConfig().evolution("classic")

    before = np.zeros((args.classes, args.classes), dtype=np.int64)
    after = np.zeros_like(before)
    print(f"{'scene':>5} {'corrupted':>10} {'recovered':>10} {'iters':>6} {'secs':>6}")
    for k, (image, gt) in enumerate(scenes):
        corrupt = flip_labels(gt, args.classes, args.flip,
                              synth.derive_seed(777, k))
        speed = mls.classic_speed(image, args.classes, cfg.rho)
        frame_cb = None
        if args.dump_frames and k == 0:
            frame_cb = frame_writer(Path(args.dump_frames), args.classes)
        start = time.perf_counter()
        phi, trace = mls.evolve(dtrans.init_phi(one_hot(corrupt, args.classes)),
                                speed, cfg, frame_cb)
        secs = time.perf_counter() - start
        final = mls.assign(phi)

        c = metrics.confusion(corrupt, gt, args.classes)
        f = metrics.confusion(final, gt, args.classes)
        before += c
        after += f
        print(f"{k:>5} {metrics.mean_iou(c):>10.4f} {metrics.mean_iou(f):>10.4f}"
              f" {len(trace.records):>6} {secs:>6.2f}")

    print(f"{'all':>5} {metrics.mean_iou(before):>10.4f} {metrics.mean_iou(after):>10.4f}")


if __name__ == "__main__":
    main()
