"""Command line front end: ``match``, ``eval``, ``synth`` and ``bench``."""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

from . import io
from .bench import benchmark
from .config import FusionMode, SolverConfig, dump_config, load_config
from .evaluation import evaluate
from .image_core import ConfigurationError
from .pipeline import run
from .synth import KINDS, SynthParameterError, SynthParams, synth_generate

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_MISMATCH = 3
EXIT_CONFIG = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _config(args) -> SolverConfig:
    cfg = SolverConfig()
    if args.config:
        if not Path(args.config).is_file():
            raise CliError(f"config file not found: {args.config}", EXIT_CONFIG)
        try:
            cfg = load_config(args.config)
        except ConfigurationError as exc:
            raise CliError(f"bad config: {exc}", EXIT_CONFIG) from exc
    if args.mode:
        cfg = cfg.replace(fusion_mode=FusionMode.parse(args.mode))
    return cfg


def _read_pair(left_path, right_path):
    images = []
    for p in (left_path, right_path):
        try:
            images.append(io.read_image(p))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read image {p}: {exc}", EXIT_UNREADABLE) from exc
    left, right = images
    if left.shape != right.shape:
        raise CliError(f"left is {left.width}x{left.height}, right is {right.width}x{right.height}",
                       EXIT_MISMATCH)
    return left, right


def cmd_match(args) -> int:
    cfg = _config(args)
    left, right = _read_pair(args.left, args.right)
    try:
        res = run(left, right, cfg, threads=args.threads)
    except ConfigurationError as exc:
        raise CliError(f"bad config: {exc}", EXIT_CONFIG) from exc
    disp_path, conf_path = io.save_disparity_map(res.disparity, args.out)
    for stage, ms in res.timings.items():
        print(f"{stage:<18} {ms:9.2f} ms")
    print(f"density={res.disparity.density:.4f}")
    print(f"wrote {disp_path} and {conf_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        pred = io.load_disparity_map(args.pred)
        gt = io.read_disparity_raster(args.gt)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read input: {exc}", EXIT_UNREADABLE) from exc
    camera = None
    if args.camera:
        try:
            camera = io.read_camera(args.camera)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read camera file: {exc}", EXIT_UNREADABLE) from exc
        if args.gt_depth:
            gt = camera.depth_to_disparity(gt)
    elif args.gt_depth:
        raise CliError("--gt-depth needs --camera", EXIT_CONFIG)
    if gt.shape != pred.disparity.shape:
        raise CliError(f"prediction {pred.disparity.shape} vs ground truth {gt.shape}", EXIT_MISMATCH)
    report = evaluate(pred, gt, args.invalid_sentinel, runtime_ms=args.runtime_ms, camera=camera)
    print(report.table())
    print()
    print("\n".join(report.metric_lines()))
    return EXIT_OK


def cmd_synth(args) -> int:
    fields = {f.name for f in dataclasses.fields(SynthParams)}
    params = SynthParams(**{k: v for k, v in vars(args).items() if k in fields and v is not None})
    try:
        left, right, gt = synth_generate(args.kind, params, args.specular)
    except SynthParameterError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_image(out / "left.png", left)
    io.write_image(out / "right.png", right)
    io.write_pfm(out / "gt.pfm", gt)
    print(f"wrote {out / 'left.png'}, {out / 'right.png'}, {out / 'gt.pfm'}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.left and args.right:
        left, right = _read_pair(args.left, args.right)
    else:
        try:
            w, h = (int(v) for v in args.size.lower().split("x"))
        except ValueError:
            raise CliError(f"--size must look like 640x480, got {args.size}", EXIT_CONFIG) from None
        left, right, _ = synth_generate("shift", SynthParams(width=w, height=h, shift=5))
    try:
        report = benchmark(left, right, cfg, args.repetitions, args.threads)
    except (ConfigurationError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    print("\n".join(report.lines()))
    return EXIT_OK


def cmd_config(args) -> int:
    print(dump_config(_config(args)), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereo-bdis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--config", help="key = value file with SolverConfig fields")
        p.add_argument("--mode", choices=["dis", "bdis"], help="fusion rule (overrides the config)")

    p = sub.add_parser("match", help="compute a disparity map for a rectified pair")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--out", required=True, help="disparity output (.pfm, or .png for 16-bit)")
    p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = all")
    solver_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="compare a disparity map with ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--camera", help="intrinsics file: fx fy cx cy baseline")
    p.add_argument("--gt-depth", action="store_true", help="ground truth holds depth, not disparity")
    p.add_argument("--invalid-sentinel", type=float, default=math.nan)
    p.add_argument("--runtime-ms", type=float, default=math.nan)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic pair with ground truth")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--specular", action="store_true", help="apply the radial gain to the right view")
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--shift", type=int)
    p.add_argument("--d-left", dest="d_left", type=float)
    p.add_argument("--d-right", dest="d_right", type=float)
    p.add_argument("--d0", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--band-fraction", dest="band_fraction", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time the matcher")
    p.add_argument("left", nargs="?")
    p.add_argument("right", nargs="?")
    p.add_argument("--size", default="640x480", help="synthetic pair size when no images are given")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("config", help="print the effective configuration")
    solver_flags(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
