"""Command line entry point.

Exit codes: 0 success, 1 validation error (bad parameters, configuration or
inputs that fail a precondition), 2 I/O error (missing, unreadable or
malformed files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from . import io
from .attention import build_attention, spherical_blur
from .config import ConfigError, PipelineConfig, dump_config, load_config
from .evaluation import build_report, depth_metrics, indicators, layout_rmse, luminance_invdepth_pcc, write_report
from .layout_recon import complete_bottom
from .pipeline import extract_cues
from .synth import CuboidScene, perturb_labels, render_cuboid
from .transforms import Sample, random_augment

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class CliIOError(Exception):
    pass


class CliValidationError(Exception):
    pass


def _load(param: str, path: Optional[str], reader: Callable):
    if path is None:
        raise CliValidationError(f"{param}: missing required file")
    try:
        return reader(path)
    except (OSError, io.FormatError) as exc:
        raise CliIOError(f"{param} {path}: {exc}") from None
    except ValueError as exc:
        raise CliIOError(f"{param} {path}: unreadable ({exc})") from None


def _config(args) -> PipelineConfig:
    path = getattr(args, "config", None)
    try:
        return load_config(path)
    except OSError as exc:
        raise CliIOError(f"--config {path}: {exc}") from None
    except ConfigError as exc:
        raise CliValidationError(f"--config {exc}") from None


def _outdir(path: Optional[str], cfg: PipelineConfig) -> Path:
    """``--out`` if given, else ``[io] out`` from the configuration."""
    path = path or cfg.io.out
    if not path:
        raise CliValidationError("--out: no output directory given and [io] out is empty")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliIOError(f"--out {path}: {exc}") from None
    return out


def _depth_2d(d: np.ndarray, param: str, path: str) -> np.ndarray:
    if d.ndim == 3:
        raise CliValidationError(f"{param} {path}: expected a single-channel depth map")
    return d


def cmd_synth_room(args) -> None:
    cfg = _config(args)
    s = cfg.synth
    try:
        scene = CuboidScene(s.x_min, s.x_max, s.z_min, s.z_max, s.y_floor, s.y_ceil, s.width, s.height)
    except ValueError as exc:
        raise CliValidationError(f"--config [synth]: {exc}") from None
    render = render_cuboid(scene)
    labels = render.labels
    if s.hole_fraction > 0:
        labels = perturb_labels(labels, s.hole_fraction, args.seed)
    out = _outdir(args.out, cfg)
    io.write_pfm(out / "depth.pfm", render.depth)
    io.write_pfm(out / "normals.pfm", render.normals)
    io.write_labels(out / "labels.png", labels)
    io.write_boundary(out / "top.json", render.top)
    io.write_boundary(out / "bottom.json", render.bottom)


def cmd_extract_cues(args) -> None:
    cfg = _config(args)
    labels = _load("--labels", args.labels, io.read_labels)
    depth = _depth_2d(_load("--depth", args.depth, io.read_grid), "--depth", args.depth)
    normals = None
    if args.normals is not None:
        normals = _load("--normals", args.normals, io.read_grid)
        if normals.shape != depth.shape + (3,):
            raise CliValidationError(f"--normals {args.normals}: shape {normals.shape} does not match depth {depth.shape}")
    if labels.shape != depth.shape:
        raise CliValidationError(f"--labels {args.labels}: shape {labels.shape} does not match depth {depth.shape}")
    cues = extract_cues(labels, depth, normals, cfg)
    out = _outdir(args.out, cfg)
    io.write_boundary(out / "top.json", cues.top)
    io.write_boundary(out / "bottom.json", cues.bottom)
    (out / "validity.json").write_text(json.dumps(
        {"scene_valid": cues.scene_valid, "mask": [bool(v) for v in cues.layout_mask]}, indent=1) + "\n")
    if args.debug:
        io.write_labels(out / "layout.png", cues.layout)
        io.write_labels(out / "refined.png", cues.refined)
        io.write_boundary(out / "top_raw.json", cues.top_raw)
        io.write_boundary(out / "bottom_raw.json", cues.bottom_raw)
        io.write_boundary(out / "top_median.json", cues.top_median)


def cmd_recon_bottom(args) -> None:
    cfg = _config(args)
    top = _load("--top", args.top, io.read_boundary)
    depth = _depth_2d(_load("--depth", args.depth, io.read_grid), "--depth", args.depth)
    if top.kind != "top":
        raise CliValidationError(f"--top {args.top}: boundary kind is {top.kind!r}, expected 'top'")
    if top.width != depth.shape[1]:
        raise CliValidationError(f"--top {args.top}: width {top.width} does not match depth width {depth.shape[1]}")
    bottom, _, _ = complete_bottom(top, depth, cfg.recon.params(), exact=args.exact or cfg.recon.exact,
                                      min_fraction=cfg.recon.min_valid_fraction)
    if args.out:
        io.write_boundary(args.out, bottom)
    else:
        sys.stdout.write(json.dumps(io.boundary_to_dict(bottom)) + "\n")


def cmd_attention(args) -> None:
    cfg = _config(args)
    top = _load("--top", args.top, io.read_boundary)
    height = args.height if args.height else top.width // 2
    if height < 1:
        raise CliValidationError(f"--height {height}: must be >= 1")
    amap = build_attention(top, cfg.attention, top.width, height)
    if not args.no_blur:
        amap = spherical_blur(amap, cfg.attention)
    io.write_pfm(args.out, amap.values)


def cmd_eval_depth(args) -> None:
    cfg = _config(args)
    pred = _depth_2d(_load("--pred", args.pred, io.read_grid), "--pred", args.pred)
    gt = _depth_2d(_load("--gt", args.gt, io.read_grid), "--gt", args.gt)
    if pred.shape != gt.shape:
        raise CliValidationError(f"--pred {args.pred}: shape {pred.shape} differs from --gt {gt.shape}")
    mask = np.ones(gt.shape, dtype=bool)
    if args.mask:
        mask = _load("--mask", args.mask, io.read_mask)
        if mask.shape != gt.shape:
            raise CliValidationError(f"--mask {args.mask}: shape {mask.shape} differs from depth {gt.shape}")
    with np.errstate(invalid="ignore"):
        mask &= (gt >= cfg.metrics.min_depth) & (gt <= cfg.metrics.max_depth)
    rep = depth_metrics(pred, gt, mask)
    i_d, _ = indicators(rep, 0.0, 0.0)
    report = build_report(abs_rel=rep.abs_rel, sq_rel=rep.sq_rel, rmse=rep.rmse, rmsle=rep.rmsle,
                          delta1=rep.delta1, delta2=rep.delta2, delta3=rep.delta3, i_d=i_d)
    _emit(report, args.report)


def cmd_eval_layout(args) -> None:
    pt = _load("--pred-top", args.pred_top, io.read_boundary)
    gt_t = _load("--gt-top", args.gt_top, io.read_boundary)
    pb = _load("--pred-bottom", args.pred_bottom, io.read_boundary)
    gb = _load("--gt-bottom", args.gt_bottom, io.read_boundary)
    if pt.width != gt_t.width or pb.width != gb.width:
        raise CliValidationError("--pred-top/--gt-top or --pred-bottom/--gt-bottom widths differ")
    top = layout_rmse(pt, gt_t)
    bottom = layout_rmse(pb, gb)
    _, i_l = indicators({"delta1": 100.0, "rmse": 0.0}, top, bottom)
    _emit(build_report(rmse_top=top, rmse_bottom=bottom, i_l=i_l), args.report)


def cmd_bias_pcc(args) -> None:
    color = _load("--color", args.color, io.read_color)
    depth = _depth_2d(_load("--depth", args.depth, io.read_grid), "--depth", args.depth)
    mask = _load("--mask", args.mask, io.read_mask) if args.mask else None
    if color.shape[:2] != depth.shape:
        raise CliValidationError(f"--color {args.color}: size {color.shape[:2]} differs from --depth {depth.shape}")
    pcc = luminance_invdepth_pcc(color, depth, mask)
    if args.report:
        write_report(args.report, build_report(pcc=pcc))
    sys.stdout.write(f"pcc = {pcc!r}\n")


_SAMPLE_FILES = {
    "color": ("color.png", io.read_color, io.write_color),
    "depth": ("depth.pfm", io.read_grid, io.write_pfm),
    "normals": ("normals.pfm", io.read_grid, io.write_pfm),
    "labels": ("labels.png", io.read_labels, io.write_labels),
    "top": ("top.json", io.read_boundary, io.write_boundary),
    "bottom": ("bottom.json", io.read_boundary, io.write_boundary),
}


def cmd_augment(args) -> None:
    cfg = _config(args)
    src = Path(args.sample)
    if not src.is_dir():
        raise CliIOError(f"--sample {args.sample}: not a directory")
    fields = {}
    for key, (name, reader, _) in _SAMPLE_FILES.items():
        if (src / name).exists():
            fields[key] = _load("--sample", str(src / name), reader)
    if not fields:
        raise CliValidationError(f"--sample {args.sample}: no known modality files found")
    try:
        sample = Sample(**fields)
    except ValueError as exc:
        raise CliValidationError(f"--sample {args.sample}: {exc}") from None
    out_sample, applied = random_augment(sample, args.seed, cfg.augment)
    out = _outdir(args.out, cfg)
    for key, (name, _, writer) in _SAMPLE_FILES.items():
        value = getattr(out_sample, key)
        if value is not None:
            writer(out / name, value)
    (out / "augment.json").write_text(json.dumps({"seed": args.seed, "applied": applied}, indent=1, sort_keys=True) + "\n")


def cmd_default_config(args) -> None:
    text = dump_config(PipelineConfig())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit(report, path: Optional[str]) -> None:
    if path:
        try:
            write_report(path, report)
        except OSError as exc:
            raise CliIOError(f"--report {path}: {exc}") from None
    else:
        sys.stdout.write(json.dumps(report, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="panolayout", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-room", help="render an analytic cuboid room")
    p.add_argument("--config")
    p.add_argument("--out", help="output directory (default: [io] out)")
    p.add_argument("--seed", type=int, default=0, help="seed for label holes")
    p.set_defaults(func=cmd_synth_room)

    p = sub.add_parser("extract-cues", help="labels + normals + depth -> layout boundaries")
    p.add_argument("--labels", required=True)
    p.add_argument("--normals")
    p.add_argument("--depth", required=True)
    p.add_argument("--out", help="output directory (default: [io] out)")
    p.add_argument("--config")
    p.add_argument("--debug", action="store_true", help="also write intermediate artifacts")
    p.set_defaults(func=cmd_extract_cues)

    p = sub.add_parser("recon-bottom", help="reconstruct the bottom boundary from top + depth")
    p.add_argument("--top", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_recon_bottom)

    p = sub.add_parser("attention", help="layout attention map from a top boundary")
    p.add_argument("--top", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--height", type=int, default=0)
    p.add_argument("--no-blur", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_attention)

    p = sub.add_parser("eval-depth", help="depth metrics report")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask")
    p.add_argument("--report")
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval_depth)

    p = sub.add_parser("eval-layout", help="layout boundary RMSE report")
    p.add_argument("--pred-top", required=True)
    p.add_argument("--gt-top", required=True)
    p.add_argument("--pred-bottom", required=True)
    p.add_argument("--gt-bottom", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval_layout)

    p = sub.add_parser("bias-pcc", help="lightness / inverse depth correlation")
    p.add_argument("--color", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--mask")
    p.add_argument("--report")
    p.set_defaults(func=cmd_bias_pcc)

    p = sub.add_parser("augment", help="seeded augmentation of a sample directory")
    p.add_argument("--sample", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output directory (default: [io] out)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("default-config", help="print the default configuration")
    p.add_argument("--out")
    p.set_defaults(func=cmd_default_config)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CliValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
