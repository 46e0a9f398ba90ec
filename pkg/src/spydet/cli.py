"""``spydet`` command line.

Exit codes: 0 success, 1 processing failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .annotations import image_files, load_detections, load_labels, write_detections
from .config import ConfigError, PipelineConfig, load_config
from .core import ComponentClass, MalformedAnnotationError, ShapeClass
from .evaluation import evaluate
from .fusion import fuse
from .pipeline import Pipeline, draw_overlay
from .preprocess import intensity, read_image, write_image
from .scorers.texture import CalibrationError, calibrate_texture_lut
from .shapedetect import batch_sd_overlap
from .shapegen import AugmentConfig, GenConfig, GenerationError, generate_dataset

log = logging.getLogger("spydet")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")
    return w, h


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config (YAML)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spydet", parents=[common], description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("shapegen", parents=[common], help="generate a synthetic shape dataset")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--collage", action="store_true", help="mix in multi-shape collage frames")
    g.add_argument("--frame-size", type=int, default=640)
    g.add_argument("--no-augment", action="store_true", help="skip rotation/shear/blur/noise")

    c = sub.add_parser("calibrate-texture", parents=[common], help="build a texture lookup table")
    c.add_argument("--images", type=Path, required=True)
    c.add_argument("--labels", type=Path, required=True)
    c.add_argument("--out", type=Path, required=True)
    c.add_argument("--binning", choices=["count", "width"], default="count")
    c.add_argument("--variance-bins", type=int)
    c.add_argument("--entropy-bins", type=int)

    r = sub.add_parser("run", parents=[common], help="detect and classify components")
    r.add_argument("--images", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True, help="component detection files")
    r.add_argument("--shapes-out", type=Path, help="also write shape detection files")
    r.add_argument("--overlay", type=Path, help="write annotated PNGs here")
    r.add_argument("--lut", type=Path, help="texture LUT (overrides texture.lut)")

    f = sub.add_parser("fuse", parents=[common], help="fuse YOLO and SpY detections")
    f.add_argument("--yolo", type=Path, required=True)
    f.add_argument("--spy", type=Path, required=True)
    f.add_argument("--out", type=Path, required=True)
    f.add_argument("--images", type=Path, help="read frame sizes from these images")
    f.add_argument("--size", type=_parse_size, default=(640, 640), help="frame size when --images is absent")

    e = sub.add_parser("eval", parents=[common], help="score detections against labels")
    e.add_argument("--detections", type=Path, required=True)
    e.add_argument("--labels", type=Path, required=True)
    e.add_argument("--shape-detections", type=Path)
    e.add_argument("--images", type=Path, help="read frame sizes from these images")
    e.add_argument("--size", type=_parse_size, default=(640, 640))
    e.add_argument("--iou", type=float, default=0.5)
    e.add_argument("--out", type=Path, help="write the JSON report here")
    return p


# --- shapegen ---------------------------------------------------------------

def cmd_shapegen(args) -> int:
    aug = AugmentConfig.off() if args.no_augment else AugmentConfig()
    cfg = GenConfig(frame_size=args.frame_size, count=args.count, collage=args.collage, augment=aug, seed=args.seed)
    manifest = generate_dataset(cfg, args.out, jobs=args.jobs)
    counts = ", ".join(f"{k}={v}" for k, v in manifest["counts"].items())
    print(f"wrote {manifest['frames']} frames to {args.out} ({counts})")
    return EXIT_OK


# --- calibrate-texture --------------------------------------------------------

def cmd_calibrate(args) -> int:
    samples = []
    for img_path in image_files(args.images):
        label_path = args.labels / f"{img_path.stem}.txt"
        if not label_path.is_file():
            log.warning("no labels for %s", img_path.name)
            continue
        img = read_image(img_path)
        gray = intensity(img)
        for d in load_labels(label_path, img.width, img.height, ComponentClass):
            b = d.box
            samples.append((gray[b.y_min:b.y_max, b.x_min:b.x_max], d.label))
    fixed = {k: v for k, v in (("variance", args.variance_bins), ("entropy", args.entropy_bins)) if v}
    lut = calibrate_texture_lut(samples, binning=args.binning, fixed_bins=fixed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    lut.save(args.out)
    counts = {c.key: lut.object_count(c) for c in lut.tables["variance"]}
    print(f"calibrated LUT from {len(samples)} crops {counts} -> {args.out}")
    return EXIT_OK


# --- run ----------------------------------------------------------------------

_worker: Pipeline | None = None


def _init_worker(cfg: PipelineConfig) -> None:
    global _worker
    _worker = Pipeline(cfg)


def _run_one(job: tuple[str, str, str | None, str | None, str | None]) -> tuple[str, int, str | None]:
    img_path, out_dir, shapes_dir, overlay_dir, _ = job
    path = Path(img_path)
    try:
        img = read_image(path)
        res = _worker.process(img, path.stem)
        write_detections(Path(out_dir) / f"{path.stem}.txt", res.components, img.width, img.height)
        if shapes_dir:
            write_detections(Path(shapes_dir) / f"{path.stem}.txt", res.shapes, img.width, img.height)
        if overlay_dir:
            write_image(Path(overlay_dir) / f"{path.stem}.png", draw_overlay(img, res.components))
        return path.name, len(res.components), None
    except Exception as exc:  # one bad image must not stop the batch
        return path.name, 0, f"{type(exc).__name__}: {exc}"


def cmd_run(args, cfg: PipelineConfig) -> int:
    if args.lut is not None:
        if not args.lut.exists():
            raise ConfigError(f"LUT path does not exist: {args.lut}")
        cfg = PipelineConfig(**{**cfg.__dict__, "lut_path": args.lut})
    if cfg.lut_path is None:
        raise ConfigError("no texture LUT given (texture.lut in --config, or --lut)")
    if not args.images.is_dir():
        raise ConfigError(f"image directory not found: {args.images}")
    files = image_files(args.images)
    if not files:
        log.warning("no images in %s", args.images)
        return EXIT_OK
    for d in (args.out, args.shapes_out, args.overlay):
        if d is not None:
            d.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), str(args.out), args.shapes_out and str(args.shapes_out),
             args.overlay and str(args.overlay), None) for p in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        _init_worker(cfg)
        results = [_run_one(j) for j in jobs]
    failures = [(name, err) for name, _, err in results if err]
    for name, err in failures:
        log.error("%s: %s", name, err)
    total = sum(n for _, n, _ in results)
    print(f"processed {len(results) - len(failures)}/{len(results)} images, {total} detections -> {args.out}")
    return EXIT_FAILURE if failures else EXIT_OK


# --- fuse / eval helpers --------------------------------------------------------

def _stems(directory: Path) -> set[str]:
    return {p.stem for p in directory.glob("*.txt")}


def _sizes(stems, images: Path | None, default: tuple[int, int]) -> dict[str, tuple[int, int]]:
    if images is None:
        return {s: default for s in stems}
    by_stem = {p.stem: p for p in image_files(images)}
    out = {}
    for s in stems:
        if s not in by_stem:
            raise FileNotFoundError(f"no image for stem '{s}' in {images}")
        img = read_image(by_stem[s])
        out[s] = (img.width, img.height)
    return out


def cmd_fuse(args, cfg: PipelineConfig) -> int:
    ys, ss = _stems(args.yolo), _stems(args.spy)
    if ys != ss:
        raise ConfigError(f"unmatched stems: yolo-only={sorted(ys - ss)} spy-only={sorted(ss - ys)}")
    sizes = _sizes(ys, args.images, args.size)
    args.out.mkdir(parents=True, exist_ok=True)
    n = 0
    for stem in sorted(ys):
        w, h = sizes[stem]
        fused = fuse(load_detections(args.yolo / f"{stem}.txt", w, h),
                     load_detections(args.spy / f"{stem}.txt", w, h), cfg.fusion)
        write_detections(args.out / f"{stem}.txt", fused, w, h)
        n += len(fused)
    print(f"fused {len(ys)} frames, {n} detections -> {args.out}")
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    label_stems = _stems(args.labels)
    det_stems = _stems(args.detections)
    missing = sorted(label_stems - det_stems)
    if missing:
        raise ConfigError(f"no detection files for stems {missing}")
    sizes = _sizes(label_stems, args.images, args.size)
    frames, gt_boxes, shape_boxes = [], {}, {}
    for stem in sorted(label_stems):
        w, h = sizes[stem]
        gts = load_labels(args.labels / f"{stem}.txt", w, h)
        dets = load_detections(args.detections / f"{stem}.txt", w, h)
        frames.append((dets, gts))
        gt_boxes[stem] = [g.box for g in gts]
        if args.shape_detections is not None:
            sp = args.shape_detections / f"{stem}.txt"
            if not sp.is_file():
                raise FileNotFoundError(f"missing shape detections: {sp}")
            shape_boxes[stem] = [d.box for d in load_detections(sp, w, h, ShapeClass)]
    report = evaluate(frames, args.iou)
    if args.shape_detections is not None:
        report.sd_overlap = batch_sd_overlap(gt_boxes, shape_boxes, sizes).to_dict()
    print(report.table())
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.command != "shapegen" else None
        if args.command == "shapegen":
            return cmd_shapegen(args)
        if args.command == "calibrate-texture":
            return cmd_calibrate(args)
        if args.command == "run":
            return cmd_run(args, cfg)
        if args.command == "fuse":
            return cmd_fuse(args, cfg)
        return cmd_eval(args, cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (GenerationError, CalibrationError, MalformedAnnotationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
