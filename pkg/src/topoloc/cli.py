"""Command-line front end for the field/dot-map pipeline.

Subcommands cover the whole surface: persistence diagrams, the combined
loss with its gradient, dot-map extraction, the evaluation metrics, dot
dilation, and the self-contained optimization demo. Every subcommand is
deterministic given its flags; all randomness is seeded explicitly.

Exit codes: 0 on success, 1 on a data error (unreadable or inconsistent
inputs), 2 on a usage error. Diagnostics go to standard error; the only
success-path output on stdout is the loss value printed by ``loss``.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Optional, Sequence

import numpy as np

from .domain import LossConfig, make_annotation, make_mask
from .dotmap import (
    DEFAULT_HIGH,
    DEFAULT_LOW,
    DEFAULT_RADIUS,
    ExtractionConfig,
    dilate_dots,
    extract_dot_map,
)
from .io import (
    game_report_dict,
    gaussian_report_dict,
    match_report_dict,
    nwpu_report_dict,
    read_dots,
    read_field,
    read_mask,
    write_diagram,
    write_dots,
    write_field,
    write_json,
    write_mask,
)
from .losses import combined_loss, tile_image
from .metrics import game, gaussian_response_eval, nwpu_eval, qnrf_fscore
from .optdemo import DEMO_PATCH_SIZE, optimize_field, synth_scene
from .persistence import compute_persistence

DEFAULT_SIGMA = 5.0


def _dims(text: str) -> tuple[int, int]:
    """Parse HxW, e.g. 480x640."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    try:
        h, w = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h <= 0 or w <= 0:
        raise argparse.ArgumentTypeError(f"dimensions must be positive, got {text!r}")
    return h, w


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoloc",
        description="Topological dot-map pipeline: diagrams, losses, extraction, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("persistence", help="write the persistence diagram of a field")
    p.add_argument("--input", required=True, help="input field (.tcf)")
    p.add_argument(
        "--connectivity",
        type=int,
        choices=(4, 8),
        default=4,
        help="pixel adjacency (default 4)",
    )
    p.add_argument("--out", required=True, help="output diagram (.json)")

    p = sub.add_parser("loss", help="combined loss value and gradient for a field")
    p.add_argument("--pred", required=True, help="predicted likelihood field (.tcf)")
    p.add_argument("--dots", required=True, help="ground-truth dot centers (.csv)")
    p.add_argument(
        "--mask",
        default=None,
        help="ground-truth mask (.tcf); dilated from --dots when omitted",
    )
    p.add_argument("--patch", type=int, default=50, help="tile size in pixels (default 50)")
    p.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=1.0,
        help="weight of the topology term (default 1.0)",
    )
    p.add_argument("--seed", type=int, default=0, help="tile-offset seed (default 0)")
    p.add_argument("--grad", default=None, help="write the gradient field here (.tcf)")

    p = sub.add_parser("extract", help="extract dot centers from a likelihood field")
    p.add_argument("--pred", required=True, help="likelihood field (.tcf)")
    p.add_argument(
        "--high",
        type=float,
        default=DEFAULT_HIGH,
        help=f"seed threshold (default {DEFAULT_HIGH})",
    )
    p.add_argument(
        "--low",
        type=float,
        default=DEFAULT_LOW,
        help=f"growth threshold (default {DEFAULT_LOW})",
    )
    p.add_argument("--out", required=True, help="output centers (.csv)")
    p.add_argument("--mask", default=None, help="write the grown-region mask here (.tcf)")

    p = sub.add_parser("eval", help="localization metrics on center lists")
    p.add_argument(
        "mode",
        choices=("game", "qnrf", "gauss", "nwpu"),
        help="metric family",
    )
    p.add_argument("--pred", required=True, help="predicted centers (.csv)")
    p.add_argument("--gt", required=True, help="ground-truth dots (.csv)")
    p.add_argument(
        "--dims",
        type=_dims,
        default=None,
        help="image size HxW (required for game)",
    )
    p.add_argument(
        "--sigma",
        type=float,
        default=DEFAULT_SIGMA,
        help=f"gaussian response scale for gauss (default {DEFAULT_SIGMA})",
    )
    p.add_argument("--out", required=True, help="output report (.json)")

    p = sub.add_parser("dilate", help="rasterize dot centers into a disk mask")
    p.add_argument("--dots", required=True, help="dot centers (.csv)")
    p.add_argument("--dims", type=_dims, required=True, help="image size HxW")
    p.add_argument(
        "--radius",
        type=float,
        default=DEFAULT_RADIUS,
        help=f"base disk radius (default {DEFAULT_RADIUS})",
    )
    p.add_argument("--out", required=True, help="output mask (.tcf)")

    p = sub.add_parser("demo", help="optimize a noise field against a synthetic scene")
    p.add_argument("--size", type=int, default=64, help="scene side length (default 64)")
    p.add_argument("--dots", type=int, default=5, help="number of dots (default 5)")
    p.add_argument("--iters", type=int, default=2000, help="iterations (default 2000)")
    p.add_argument(
        "--step",
        type=float,
        default=0.5,
        help="initial step size, decays linearly to zero (default 0.5)",
    )
    p.add_argument("--seed", type=int, default=0, help="scene and descent seed (default 0)")
    p.add_argument(
        "--out-prefix",
        required=True,
        help="writes <prefix>_trace.csv, <prefix>_field.tcf, <prefix>_dots.csv",
    )
    return parser


def _run_persistence(args: argparse.Namespace) -> int:
    field = read_field(args.input)
    write_diagram(compute_persistence(field, args.connectivity), args.out)
    return 0


def _run_loss(args: argparse.Namespace) -> int:
    field = read_field(args.pred)
    ann = read_dots(args.dots)
    if args.mask is not None:
        gt = read_mask(args.mask)
    else:
        gt = dilate_dots(ann, field.height, field.width)
    cfg = LossConfig(lambda_pers=args.lam, patch_size=args.patch, rng_seed=args.seed)
    tiles = tile_image(field.height, field.width, ann, args.patch, args.seed)
    res = combined_loss(field, gt, tiles, cfg)
    print(repr(res.value))
    if args.grad is not None:
        write_field(res.gradient, args.grad)
    return 0


def _run_extract(args: argparse.Namespace) -> int:
    field = read_field(args.pred)
    result = extract_dot_map(field, ExtractionConfig(high=args.high, low=args.low))
    write_dots(make_annotation(result.centers), args.out)
    if args.mask is not None:
        bits = (result.labels > 0).astype(np.uint8)
        write_mask(make_mask(field.height, field.width, bits), args.mask)
    return 0


def _run_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    pred = read_dots(args.pred)
    gt = read_dots(args.gt)
    if args.mode == "game":
        if args.dims is None:
            parser.error("eval game requires --dims")
        rep = game([pred.points], [gt.points], [args.dims])
        write_json(game_report_dict(rep), args.out)
    elif args.mode == "qnrf":
        write_json(match_report_dict(qnrf_fscore(pred.points, gt.points)), args.out)
    elif args.mode == "gauss":
        rep = gaussian_response_eval(pred.points, gt.points, args.sigma)
        write_json(gaussian_report_dict(rep), args.out)
    else:
        write_json(nwpu_report_dict(nwpu_eval(pred.points, gt)), args.out)
    return 0


def _run_dilate(args: argparse.Namespace) -> int:
    ann = read_dots(args.dots)
    h, w = args.dims
    write_mask(dilate_dots(ann, h, w, base_radius=args.radius), args.out)
    return 0


def _run_demo(args: argparse.Namespace) -> int:
    ann, mask = synth_scene(args.size, args.size, args.dots, rng_seed=args.seed)
    cfg = LossConfig(lambda_pers=1.0, patch_size=DEMO_PATCH_SIZE, rng_seed=args.seed)
    field, trace = optimize_field(mask, ann, cfg, n_iters=args.iters, step=args.step)
    with open(f"{args.out_prefix}_trace.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "loss", "components"])
        for row in trace:
            writer.writerow([row.iteration, repr(row.loss), row.components])
    write_field(field, f"{args.out_prefix}_field.tcf")
    write_dots(ann, f"{args.out_prefix}_dots.csv")
    print(f"final components: {trace[-1].components}", file=sys.stderr)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "persistence":
            return _run_persistence(args)
        if args.command == "loss":
            return _run_loss(args)
        if args.command == "extract":
            return _run_extract(args)
        if args.command == "eval":
            return _run_eval(args, parser)
        if args.command == "dilate":
            return _run_dilate(args)
        return _run_demo(args)
    except SystemExit as exc:  # parser.error inside a handler
        return int(exc.code or 0)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
