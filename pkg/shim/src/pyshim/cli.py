"""Command-line surface: convert | render."""

from __future__ import annotations

import argparse
import sys

from .convert import LAYOUTS, ConversionJob, convert
from .render import render_frames


def _cmd_convert(args) -> int:
    job = ConversionJob(
        input_path=args.array,
        output_path=args.out,
        layout=args.layout,
        apply_softmax=args.softmax,
    )
    out = convert(job)
    print(f"wrote {out}")
    return 0


def _cmd_render(args) -> int:
    report = render_frames(args.frames, args.out)
    for path, problem in report.problems:
        print(f"warning: {path}: {problem}", file=sys.stderr)
    print(f"wrote {len(report.written)} composite(s)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyshim",
        description="Array-dump conversion and frame rendering for MLS1 pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("convert", help="turn a .npy/.npz score dump into an MLS1 file",
                       formatter_class=fmt)
    p.add_argument("--array", required=True, help="input .npy or single-entry .npz")
    p.add_argument("--out", required=True, help="output MLS1 path")
    p.add_argument("--layout", choices=LAYOUTS, default="plane-major",
                   help="axis order of the input array")
    p.add_argument("--softmax", action="store_true",
                   help="normalize each pixel across classes before writing")
    p.set_defaults(fn=_cmd_convert)

    p = sub.add_parser("render", help="render evolve --dump-frames output to images",
                       formatter_class=fmt)
    p.add_argument("--frames", required=True, help="directory of frame dumps")
    p.add_argument("--out", required=True, help="directory for composites")
    p.set_defaults(fn=_cmd_render)
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
