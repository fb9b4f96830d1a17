"""Command-line front end: ``gen``, ``convolve``, ``detect``, ``restore``, ``verify``.

Every command writes plain files (PGM/CSV images, JSON reports, CSV score
tables) so runs can be diffed and plotted afterwards.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .cedetect import U_FORM, V_FORM, CEConfig, CESize, detect
from .imagez import ImageFormatError, _atomic_write, convolve, gen_test_scene, read_image, write_image
from .numerics import NumericsError, PrecisionContext
from .restore import RestorationError, restore, verify
from .zerotrack import SamplingPlan

SCORE_HEADER = ["axis", "phi_index", "phi", "branch", "absE", "score", "flagged"]
_AXES = {"u": [U_FORM], "v": [V_FORM], "both": [U_FORM, V_FORM]}


class UsageError(Exception):
    pass


def _dump(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _size(text: str) -> CESize:
    try:
        return CESize.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_ce_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--size", type=_size, default=CESize(2, 3), help="CE blur size MxN (default 2x3)")
    p.add_argument("--dphi", type=float, default=math.pi / 2150, help="angular sample step (default pi/2150)")
    p.add_argument("--rho", type=float, default=1.0, help="sampling circle radius (default 1)")
    p.add_argument("--direction", choices=["clockwise", "counterclockwise"], default="clockwise")
    p.add_argument("--stepping", choices=["rotational", "additive"], default="rotational")
    p.add_argument("--digits", type=int, default=120, help="working precision in decimal digits")
    p.add_argument("--scale", type=float, default=1e50, help="CE magnitude scale before the log")
    p.add_argument("--tau", type=float, default=5.0, help="score threshold for a blur zero")
    p.add_argument("--sweep", type=int, default=64, help="number of sweep angles")


def _config(args) -> tuple[CEConfig, PrecisionContext]:
    plan = SamplingPlan(rho=args.rho, dphi=args.dphi, count=args.size.order,
                        direction=args.direction, stepping=args.stepping)
    cfg = CEConfig(size=args.size, plan=plan, scale=args.scale, tau=args.tau, sweep_count=args.sweep)
    return cfg, PrecisionContext(digits=args.digits)


def _input(path: str) -> np.ndarray:
    if not Path(path).is_file():
        raise UsageError(f"input image not found: {path}")
    return read_image(path)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    out = _out_dir(args.out)
    scene = gen_test_scene(args.seed, separable=args.separable)
    write_image(scene.true, out / "true.pgm")
    names = []
    for h in scene.blurs:
        name = f"blur_{h.shape[0]}x{h.shape[1]}.csv"
        write_image(h, out / name)
        names.append(name)
    write_image(scene.observed, out / "observed.csv")
    files = ["true.pgm", *names, "observed.csv"]
    if scene.observed.max() <= 65535:
        write_image(scene.observed, out / "observed.pgm")
        files.append("observed.pgm")
    manifest = {
        "seed": args.seed,
        "separable": args.separable,
        "files": files,
        "dims": {
            "true": list(scene.true.shape),
            "observed": list(scene.observed.shape),
            "blurs": [list(h.shape) for h in scene.blurs],
        },
        "sums": {
            "true": float(scene.true.sum()),
            "observed": float(scene.observed.sum()),
            "blurs": [float(h.sum()) for h in scene.blurs],
        },
        "blur_mass": scene.blur_mass,
        "leading_product": scene.leading_product,
    }
    _atomic_write(out / "manifest.json", _dump(manifest))
    return 0


def cmd_convolve(args) -> int:
    img = _input(args.image)
    kernel = _input(args.kernel)
    write_image(convolve(img, kernel), args.out)
    return 0


def cmd_detect(args) -> int:
    img = _input(args.image)
    cfg, ctx = _config(args)
    out = _out_dir(args.out)
    reports = [detect(img, cfg, form, ctx) for form in _AXES[args.axis]]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_HEADER)
    for rep in reports:
        writer.writerows(rep.csv_rows())
    _atomic_write(out / "scores.csv", buf.getvalue().encode())
    body = {rep.axis: rep.to_dict() for rep in reports}
    body["consensus_count"] = {rep.axis: rep.consensus_count for rep in reports}
    _atomic_write(out / "report.json", _dump(body))
    for rep in reports:
        print(f"{rep.axis}: consensus_count={rep.consensus_count} agreement={rep.agreement():.3f}")
    return 0 if any(rep.consensus_count >= 1 for rep in reports) else 1


def cmd_restore(args) -> int:
    img = _input(args.image)
    cfg, ctx = _config(args)
    out = _out_dir(args.out)
    try:
        result = restore(img, cfg, args.mode, ctx, blur_mass=args.blur_mass)
    except RestorationError as exc:
        raise RestorationError(f"restoring {args.image}: {exc}") from exc
    write_image(result.restored, out / "restored.pgm")
    write_image(result.restored, out / "restored.csv")
    _atomic_write(out / "diagnostics.json", _dump(result.to_dict()))
    print(f"restored {result.restored.shape[0]}x{result.restored.shape[1]} "
          f"(imag residual {result.max_imag_residual:.3e})")
    return 0


def cmd_verify(args) -> int:
    metrics = verify(_input(args.restored), _input(args.original))
    print(json.dumps(metrics, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cedeconv", description="Blind deconvolution by multi-point conditional expressions."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write the seeded four-blur test scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separable", action="store_true", help="use outer-product kernels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("convolve", help="full convolution of an image with a kernel")
    p.add_argument("image")
    p.add_argument("kernel")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("detect", help="evaluate the CE sweep and count blur zeros")
    p.add_argument("image")
    p.add_argument("--axis", choices=list(_AXES), default="both")
    _add_ce_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("restore", help="deflate detected blur zeros and invert")
    p.add_argument("image")
    p.add_argument("--mode", choices=["sequential", "literal"], default="sequential")
    p.add_argument("--blur-mass", type=float, default=1.0,
                   help="total kernel sum used to fix the scale (default 1)")
    _add_ce_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("verify", help="compare a restored image with the original")
    p.add_argument("--original", required=True)
    p.add_argument("--restored", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cedeconv {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ImageFormatError, RestorationError, NumericsError, ValueError, OSError) as exc:
        print(f"cedeconv {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
