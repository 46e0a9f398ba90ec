"""Synthetic shape dataset generator.

Renders gray anti-aliased circles, rectangles, triangles and rings on gray,
white or black backgrounds, one shape per frame or several as a collage,
then optionally applies rotation, shear, blur and noise. Every frame draws
from its own RNG stream seeded by ``(seed, frame_index)`` so output does not
depend on how frames are distributed over workers.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import cv2
import numpy as np

from .annotations import format_label
from .core import BoundingBox, Detection, NormalizedBox, ShapeClass, iou, pixel_to_normalized
from .preprocess import ColorSpace, ImageBuffer

log = logging.getLogger(__name__)

BACKGROUNDS = {"gray": 128, "white": 255, "black": 0}
SHIFT = 4  # sub-pixel bits for cv2 drawing
_SCALE = 1 << SHIFT


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    rotation: bool = True
    shear: bool = True
    blur: bool = True
    noise: bool = True
    rotation_range: float = 180.0
    shear_range: float = 15.0
    blur_sigma: tuple[float, float] = (0.0, 2.0)
    noise_sigma: tuple[float, float] = (0.0, 15.0)
    min_area: int = 16

    @classmethod
    def off(cls) -> "AugmentConfig":
        return cls(rotation=False, shear=False, blur=False, noise=False)

    @property
    def enabled(self) -> bool:
        return self.rotation or self.shear or self.blur or self.noise


@dataclass(frozen=True)
class GenConfig:
    frame_size: int = 640
    count: int = 100
    collage: bool = False
    collage_prob: float = 0.5
    shapes_per_collage: tuple[int, int] = (2, 6)
    backgrounds: tuple[str, ...] = ("gray", "white", "black")
    contrast_margin: int = 30
    max_iou: float = 0.0
    max_retries: int = 200
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def __post_init__(self):
        if self.frame_size <= 0:
            raise ValueError("frame_size must be positive")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        lo, hi = self.shapes_per_collage
        if not 1 <= lo <= hi:
            raise ValueError(f"bad shapes_per_collage range {self.shapes_per_collage}")
        unknown = set(self.backgrounds) - set(BACKGROUNDS)
        if unknown or not self.backgrounds:
            raise ValueError(f"backgrounds must be drawn from {sorted(BACKGROUNDS)}")


@dataclass(frozen=True)
class ShapeSpec:
    """Shape geometry in continuous pixel coordinates (pixel i spans [i, i+1))."""

    shape: ShapeClass
    center: tuple[float, float]
    radius: float = 0.0  # circle, ring outer
    inner_radius: float = 0.0  # ring
    width: float = 0.0  # rectangle
    height: float = 0.0
    side: float = 0.0  # triangle
    angle: float = 0.0  # triangle orientation, radians
    fill: int = 200

    def vertices(self) -> np.ndarray:
        cx, cy = self.center
        if self.shape is ShapeClass.RECTANGLE:
            hw, hh = self.width / 2, self.height / 2
            return np.array([[cx - hw, cy - hh], [cx + hw, cy - hh], [cx + hw, cy + hh], [cx - hw, cy + hh]])
        if self.shape is ShapeClass.TRIANGLE:
            r = self.side / math.sqrt(3)
            ang = self.angle + np.array([0, 2 * math.pi / 3, 4 * math.pi / 3])
            return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)
        raise ValueError(f"{self.shape} has no vertices")

    def extent(self) -> tuple[float, float, float, float]:
        """Analytic bounds (x0, y0, x1, y1)."""
        if self.shape in (ShapeClass.CIRCLE, ShapeClass.RING):
            cx, cy = self.center
            return cx - self.radius, cy - self.radius, cx + self.radius, cy + self.radius
        v = self.vertices()
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


def _fixed(pt: Sequence[float]) -> tuple[int, int]:
    # continuous -> cv2 pixel-center coordinates, in sub-pixel fixed point
    return int(round((pt[0] - 0.5) * _SCALE)), int(round((pt[1] - 0.5) * _SCALE))


def render_mask(spec: ShapeSpec, size: int) -> np.ndarray:
    """Anti-aliased coverage mask (0..255) of one shape."""
    mask = np.zeros((size, size), dtype=np.uint8)
    if spec.shape in (ShapeClass.CIRCLE, ShapeClass.RING):
        c = _fixed(spec.center)
        cv2.circle(mask, c, int(round(spec.radius * _SCALE)), 255, -1, cv2.LINE_AA, SHIFT)
        if spec.shape is ShapeClass.RING:
            cv2.circle(mask, c, int(round(spec.inner_radius * _SCALE)), 0, -1, cv2.LINE_AA, SHIFT)
    else:
        pts = np.array([_fixed(p) for p in spec.vertices()], dtype=np.int32)
        cv2.fillPoly(mask, [pts], 255, cv2.LINE_AA, SHIFT)
    return mask


def mask_bounds(mask: np.ndarray) -> BoundingBox | None:
    ys = np.flatnonzero(mask.any(axis=1))
    xs = np.flatnonzero(mask.any(axis=0))
    if len(xs) == 0:
        return None
    return BoundingBox(int(xs[0]), int(ys[0]), int(xs[-1]) + 1, int(ys[-1]) + 1)


def sample_spec(shape: ShapeClass, size: int, fill: int, rng: np.random.Generator) -> ShapeSpec:
    lo, hi = 0.05 * size, 0.10 * size
    if shape in (ShapeClass.CIRCLE, ShapeClass.RING):
        r = rng.uniform(lo, hi)
        inner = r * rng.uniform(0.4, 0.8) if shape is ShapeClass.RING else 0.0
        proto = ShapeSpec(shape, (0.0, 0.0), radius=r, inner_radius=inner, fill=fill)
    elif shape is ShapeClass.RECTANGLE:
        proto = ShapeSpec(shape, (0.0, 0.0), width=rng.uniform(0.05 * size, 0.5 * size),
                          height=rng.uniform(0.05 * size, 0.5 * size), fill=fill)
    else:
        proto = ShapeSpec(shape, (0.0, 0.0), side=rng.uniform(lo, hi),
                          angle=rng.uniform(0, 2 * math.pi), fill=fill)
    x0, y0, x1, y1 = proto.extent()
    # keep a 1px margin so anti-aliasing never touches the frame edge
    cx = rng.uniform(1 - x0, size - 1 - x1)
    cy = rng.uniform(1 - y0, size - 1 - y1)
    return replace(proto, center=(cx, cy))


def sample_fill(background: int, margin: int, rng: np.random.Generator) -> int:
    allowed = [v for v in range(256) if abs(v - background) >= margin]
    return int(rng.choice(allowed))


@dataclass
class GeneratedFrame:
    image: ImageBuffer
    labels: list[Detection]
    background: int
    specs: list[ShapeSpec] = field(default_factory=list)

    def normalized_labels(self) -> list[tuple[ShapeClass, NormalizedBox]]:
        w, h = self.image.width, self.image.height
        return [(d.label, pixel_to_normalized(d.box, w, h, d.label.value)) for d in self.labels]


def compose(specs: Sequence[ShapeSpec], size: int, background: int) -> tuple[np.ndarray, list[BoundingBox]]:
    canvas = np.full((size, size), float(background))
    boxes = []
    for spec in specs:
        m = render_mask(spec, size)
        alpha = m.astype(np.float64) / 255.0
        canvas = canvas * (1 - alpha) + spec.fill * alpha
        boxes.append(mask_bounds(m))
    return np.floor(canvas + 0.5).astype(np.uint8), boxes


def generate_frame(cfg: GenConfig, rng: np.random.Generator, index: int = 0) -> GeneratedFrame:
    size = cfg.frame_size
    bg = BACKGROUNDS[cfg.backgrounds[int(rng.integers(len(cfg.backgrounds)))]]
    shapes = list(ShapeClass)
    if cfg.collage and rng.random() < cfg.collage_prob:
        lo, hi = cfg.shapes_per_collage
        classes = [shapes[int(k)] for k in rng.integers(len(shapes), size=int(rng.integers(lo, hi + 1)))]
    else:
        classes = [shapes[index % len(shapes)]]

    specs: list[ShapeSpec] = []
    boxes: list[BoundingBox] = []
    for cls in classes:
        for _ in range(cfg.max_retries):
            spec = sample_spec(cls, size, sample_fill(bg, cfg.contrast_margin, rng), rng)
            box = mask_bounds(render_mask(spec, size))
            if box is None:
                continue
            if all(iou(box, b) <= cfg.max_iou for b in boxes):
                specs.append(spec)
                boxes.append(box)
                break
        else:
            raise GenerationError(f"frame {index}: could not place {cls.name.lower()} after {cfg.max_retries} tries")

    gray, boxes = compose(specs, size, bg)
    img = ImageBuffer(np.repeat(gray[..., None], 3, axis=2), ColorSpace.RGB)
    labels = [Detection(b, s.shape, 1.0) for s, b in zip(specs, boxes)]
    frame = GeneratedFrame(img, labels, bg, specs)
    if cfg.augment.enabled:
        img, labels = augment(img, labels, cfg.augment, rng, background=bg)
        frame = GeneratedFrame(img, labels, bg, specs)
    return frame


# --- augmentation -----------------------------------------------------------

def affine_matrix(angle_deg: float, shear_deg: float, center: tuple[float, float]) -> np.ndarray:
    """2x3 map in continuous coordinates: rotate and shear about ``center``.

    Positive angles turn +x toward +y (clockwise on screen, y pointing down).
    """
    t = math.radians(angle_deg)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    shear = np.array([[1.0, math.tan(math.radians(shear_deg))], [0.0, 1.0]])
    a = rot @ shear
    c = np.asarray(center, dtype=np.float64)
    return np.hstack([a, (c - a @ c)[:, None]])


def warp_box(box: BoundingBox, m: np.ndarray, width: int, height: int) -> BoundingBox | None:
    corners = np.array([[box.x_min, box.y_min], [box.x_max, box.y_min],
                        [box.x_max, box.y_max], [box.x_min, box.y_max]], dtype=np.float64)
    warped = corners @ m[:, :2].T + m[:, 2]
    x0, y0 = warped.min(axis=0)
    x1, y1 = warped.max(axis=0)
    try:
        return BoundingBox.from_float(x0, y0, x1, y1, width, height)
    except ValueError:
        return None


def warp_image(data: np.ndarray, m: np.ndarray, border: int) -> np.ndarray:
    # shift into cv2's pixel-center convention: p_cv = p - 0.5
    m_cv = m.copy()
    m_cv[:, 2] += m[:, :2] @ np.array([0.5, 0.5]) - 0.5
    h, w = data.shape[:2]
    return cv2.warpAffine(data, m_cv, (w, h), flags=cv2.INTER_LINEAR,
                          borderMode=cv2.BORDER_CONSTANT, borderValue=(border, border, border))


def augment(
    img: ImageBuffer,
    labels: list[Detection],
    ops: AugmentConfig,
    rng: np.random.Generator,
    background: int | None = None,
    angle: float | None = None,
    shear: float | None = None,
) -> tuple[ImageBuffer, list[Detection]]:
    """Apply the enabled augmentations. ``angle``/``shear`` override the random draw."""
    if not ops.enabled and angle is None and shear is None:
        return img, labels
    data = img.data
    w, h = img.width, img.height
    if angle is None:
        angle = rng.uniform(-ops.rotation_range, ops.rotation_range) if ops.rotation else 0.0
    if shear is None:
        shear = rng.uniform(-ops.shear_range, ops.shear_range) if ops.shear else 0.0
    if angle or shear:
        if background is None:
            from .shapedetect import background_level
            background = background_level(data if data.ndim == 2 else data[..., 0])
        m = affine_matrix(angle, shear, (w / 2, h / 2))
        data = warp_image(data, m, background)
        kept = []
        for d in labels:
            nb = warp_box(d.box, m, w, h)
            if nb is None or nb.area < ops.min_area:
                log.debug("dropping %s label after warp", d.label)
                continue
            kept.append(Detection(nb, d.label, d.confidence))
        labels = kept
    if ops.blur:
        sigma = rng.uniform(*ops.blur_sigma)
        if sigma > 0:
            data = cv2.GaussianBlur(data, (0, 0), sigma)
    if ops.noise:
        sigma = rng.uniform(*ops.noise_sigma)
        if sigma > 0:
            noisy = data.astype(np.float64) + rng.normal(0.0, sigma, size=data.shape[:2])[..., None]
            if data.ndim == 2:
                noisy = noisy[..., 0]
            data = np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8)
    return ImageBuffer(np.ascontiguousarray(data), img.color_space), labels


# --- dataset output ---------------------------------------------------------

def frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _encode(frame: GeneratedFrame) -> tuple[bytes, str, list[int]]:
    ok, png = cv2.imencode(".png", np.ascontiguousarray(frame.image.data[:, :, ::-1]))
    if not ok:
        raise GenerationError("PNG encoding failed")
    text = "".join(format_label(n) + "\n" for _, n in frame.normalized_labels())
    return png.tobytes(), text, [d.label.value for d in frame.labels]


def _render_job(args: tuple[GenConfig, int]) -> tuple[bytes, str, list[int]]:
    cfg, index = args
    return _encode(generate_frame(cfg, frame_rng(cfg.seed, index), index))


def class_mapping() -> dict[str, int]:
    return {s.name.lower(): s.value for s in ShapeClass}


def _write_entries(entries: Iterable[tuple[bytes, str, list[int]]], out_dir: str | Path, extra: dict) -> dict:
    out = Path(out_dir)
    names = list(class_mapping())
    counts = {name: 0 for name in names}
    manifest = {**extra, "frames": 0, "class_ids": class_mapping(), "counts": counts}
    for i, (png, text, ids) in enumerate(entries):
        if i == 0:
            (out / "images").mkdir(parents=True, exist_ok=True)
            (out / "labels").mkdir(parents=True, exist_ok=True)
        stem = f"{i:06d}"
        try:
            (out / "images" / f"{stem}.png").write_bytes(png)
            (out / "labels" / f"{stem}.txt").write_text(text)
        except OSError as exc:
            raise OSError(f"writing frame {stem} under {out}: {exc}") from exc
        for k in ids:
            counts[names[k]] += 1
        manifest["frames"] += 1
    if manifest["frames"]:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_dataset(frames: Sequence[GeneratedFrame], out_dir: str | Path) -> dict:
    """Write frames as ``images/<stem>.png`` + ``labels/<stem>.txt`` and a manifest.

    An empty frame list writes nothing and returns an empty manifest.
    """
    return _write_entries((_encode(f) for f in frames), out_dir, {})


def generate_dataset(cfg: GenConfig, out_dir: str | Path, jobs: int = 1) -> dict:
    """Generate ``cfg.count`` frames, optionally across ``jobs`` processes."""
    work = [(cfg, i) for i in range(cfg.count)]
    if jobs > 1 and work:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_render_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = map(_render_job, work)
    return _write_entries(results, out_dir, {"seed": cfg.seed, "frame_size": cfg.frame_size})
