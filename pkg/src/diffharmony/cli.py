"""Command-line interface.

Exit codes: 0 success, 1 demo property failure, 2 bad arguments or config,
3 I/O failure, 4 shape or mask violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from ._io import atomic_write_json
from ._random import SYNTH, rng_stream
from ._validation import MaskError, ShapeError
from .config import ConfigError, RunConfig
from .estimators import COND_SUFFIX
from .evaluation import UnmatchedFilesError, evaluate_dirs, synthesize_composite
from .harmonize import CompositeInput, DiffusionHarmonizer, TransferConfig, candidate_report, color_transfer
from .image import COLORSPACES, load_mask, load_png, save_png

logger = logging.getLogger("diffharmony")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_SHAPE = 0, 1, 2, 3, 4


def _overrides(args, mapping) -> dict:
    return {field: getattr(args, attr) for attr, field in mapping.items()}


def cmd_harmonize(args) -> int:
    cfg = RunConfig.load(
        args.config,
        _overrides(args, {"k": "k", "seed": "seed", "scale": "scale", "steps": "steps",
                          "codec": "codec", "colorspace": "colorspace", "lam": "match_strength",
                          "dataset": "dataset"}),
    )
    if args.no_transfer:
        cfg.transfer = False
    composite = load_png(args.composite)
    mask = load_mask(args.mask)
    gt = load_png(args.ground_truth) if args.ground_truth else None
    inp = CompositeInput(composite, mask, gt)

    model = DiffusionHarmonizer(**cfg.harmonizer_params())
    refs = conds = None
    if cfg.dataset:
        files = sorted(p for p in Path(cfg.dataset).glob("*.png") if not p.stem.endswith(COND_SUFFIX))
        if not files:
            raise FileNotFoundError(f"no PNG files in dataset directory {cfg.dataset}")
        refs = [load_png(p) for p in files]
        # conditions are used only when every reference has one
        cond_files = [p.with_name(p.stem + COND_SUFFIX + ".png") for p in files]
        if all(p.exists() for p in cond_files):
            conds = [load_png(p) for p in cond_files]
    model.fit(refs, conds)
    candidates = model.predict(inp.composite, inp.mask)

    out = Path(args.out)
    stem = Path(args.composite).stem
    names = []
    for i, cand in enumerate(candidates):
        name = f"{stem}_k{i}.png"
        save_png(cand, out / name)
        names.append(name)
        logger.info("wrote %s", out / name)
    rows = candidate_report(candidates, inp)
    for row, name in zip(rows, names):
        row["file"] = name
    atomic_write_json(out / f"{stem}.json", {"composite": str(args.composite), "candidates": rows})
    cfg.dump(out / "config.json")
    return EXIT_OK


def cmd_transfer(args) -> int:
    cfg = RunConfig.load(args.config, {"colorspace": args.colorspace, "match_strength": args.lam})
    source = load_png(args.source)
    target = load_png(args.target)
    mask = load_mask(args.mask)
    if source.shape != target.shape:
        raise ShapeError(f"shape mismatch: source {source.shape} vs target {target.shape}")
    out = color_transfer(source, target, mask, TransferConfig(cfg.colorspace, cfg.match_strength))
    out_path = Path(args.out)
    save_png(out, out_path)
    cfg.dump(out_path.with_name(out_path.stem + ".config.json"))
    return EXIT_OK


def cmd_eval(args) -> int:
    group_map = None
    if args.groups:
        with open(args.groups, encoding="utf-8") as fh:
            group_map = json.load(fh)
        if not isinstance(group_map, dict):
            raise ConfigError("groups", "group file must map filename stems to group names")
    report = evaluate_dirs(args.pred, args.gt, group_map)
    print(report.format_table())
    if args.json:
        atomic_write_json(args.json, report.to_dict())
    return EXIT_OK


def _synth_one(stem, image_path, mask_path, out, seed):
    real = load_png(image_path)
    mask = load_mask(mask_path)
    comp = synthesize_composite(real, mask, rng_stream(seed, SYNTH, stem))
    save_png(comp.composite, out / "composite" / f"{stem}.png")
    save_png(comp.mask, out / "mask" / f"{stem}.png")
    save_png(comp.ground_truth, out / "gt" / f"{stem}.png")
    return stem


def cmd_synth(args) -> int:
    images, masks, out = Path(args.images), Path(args.masks), Path(args.out)
    for d in (images, masks):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory: {d}")
    cfg = RunConfig.load(args.config, {"seed": args.seed})
    image_files = {p.stem: p for p in images.glob("*.png")}
    mask_files = {p.stem: p for p in masks.glob("*.png")}
    stems = sorted(set(image_files) & set(mask_files))
    missing = sorted(set(image_files) - set(mask_files))
    if missing:
        logger.warning("no mask for %s; skipped", missing)
    if not stems:
        raise FileNotFoundError(f"no image/mask pairs with matching names in {images} and {masks}")
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        done = list(pool.map(lambda s: _synth_one(s, image_files[s], mask_files[s], out, cfg.seed), stems))
    logger.info("synthesized %d composites", len(done))
    cfg.dump(out / "config.json")
    return EXIT_OK


def cmd_demo(args) -> int:
    from .demo import run_demo

    summary = run_demo(flip_guidance_sign=args.flip_guidance_sign, n_mixture_samples=args.mixture_samples)
    out = Path(args.out)
    atomic_write_json(out / "summary.json", summary)
    for name, res in summary["properties"].items():
        print(f"{'PASS' if res['passed'] else 'FAIL'}  {name}")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffharmony", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v progress, -vv per-step")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harmonize", help="generate harmonized candidates for a composite")
    p.add_argument("--composite", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ground-truth", help="optional ground truth for MSE/PSNR in the sidecar")
    p.add_argument("--config")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--codec", choices=["identity", "pool"])
    p.add_argument("--colorspace", choices=COLORSPACES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--dataset", help="directory of reference PNGs for the mixture estimator")
    p.add_argument("--no-transfer", action="store_true")
    p.set_defaults(func=cmd_harmonize)

    p = sub.add_parser("transfer", help="color transfer from a source image onto a target's lightness")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--colorspace", choices=COLORSPACES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval", help="MSE/PSNR report for prediction vs ground-truth directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--groups", help="JSON file mapping filename stems to group names")
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="synthesize recolored composites from real images and masks")
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("demo", help="run the toy-mixture property suite")
    p.add_argument("--out", required=True)
    p.add_argument("--mixture-samples", type=int, default=2000)
    p.add_argument("--flip-guidance-sign", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ShapeError, MaskError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SHAPE
    except UnmatchedFilesError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
