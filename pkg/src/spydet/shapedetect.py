"""Shape-detection stage and the SD_overlap coverage metric.

Two providers implement the detector contract: :class:`ReplayProvider`
reads detections exported by an external model, and
:class:`GeometricProvider` finds primitives with contours and polygon
approximation so the pipeline runs without a trained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import cv2
import numpy as np

from .annotations import load_detections
from .core import BoundingBox, Detection, ShapeClass, rasterize_union
from .preprocess import ImageBuffer, highpass_mask, intensity


class MissingDetectionsError(FileNotFoundError):
    pass


class ShapeDetectionProvider(Protocol):
    def detect(self, img: ImageBuffer, stem: str | None = None) -> list[Detection]: ...


@dataclass(frozen=True)
class ReplayProvider:
    """Serves detections from ``<directory>/<stem>.txt`` files."""

    directory: Path

    def __post_init__(self):
        object.__setattr__(self, "directory", Path(self.directory))

    def detect(self, img: ImageBuffer, stem: str | None = None) -> list[Detection]:
        if stem is None:
            raise ValueError("replay provider needs the image stem")
        path = self.directory / f"{stem}.txt"
        if not path.is_file():
            raise MissingDetectionsError(f"no detections for '{stem}' at {path}")
        return load_detections(path, img.width, img.height, ShapeClass)


@dataclass(frozen=True)
class GeometricConfig:
    epsilon_frac: float = 0.03
    circularity_min: float = 0.8
    hole_circularity_min: float = 0.75
    right_angle_tol: float = 15.0
    min_area: float = 100.0
    binarize: str = "background"  # or "highpass"
    threshold: int = 15
    highpass_sigma: float = 3.5

    def __post_init__(self):
        if not 0 < self.epsilon_frac <= 0.2:
            raise ValueError(f"epsilon_frac must be in (0, 0.2], got {self.epsilon_frac}")
        if self.min_area <= 0:
            raise ValueError("min_area must be positive")
        if self.binarize not in ("background", "highpass"):
            raise ValueError(f"unknown binarize mode {self.binarize!r}")


def background_level(gray: np.ndarray) -> int:
    border = np.concatenate([gray[0, :], gray[-1, :], gray[:, 0], gray[:, -1]])
    return int(np.median(border))


def binarize(gray: np.ndarray, cfg: GeometricConfig) -> np.ndarray:
    if cfg.binarize == "highpass":
        return highpass_mask(gray, cfg.highpass_sigma, cfg.threshold)
    diff = np.abs(gray.astype(np.int16) - background_level(gray))
    return np.where(diff > cfg.threshold, 255, 0).astype(np.uint8)


def circularity(contour: np.ndarray) -> float:
    perimeter = cv2.arcLength(contour, True)
    if perimeter == 0:
        return 0.0
    return 4 * math.pi * cv2.contourArea(contour) / perimeter ** 2


def corner_angles(poly: np.ndarray) -> list[float]:
    pts = poly.reshape(-1, 2).astype(np.float64)
    n = len(pts)
    out = []
    for i in range(n):
        a = pts[i - 1] - pts[i]
        b = pts[(i + 1) % n] - pts[i]
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        if denom == 0:
            out.append(0.0)
            continue
        out.append(math.degrees(math.acos(np.clip(np.dot(a, b) / denom, -1.0, 1.0))))
    return out


def _clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


@dataclass(frozen=True)
class GeometricProvider:
    cfg: GeometricConfig = field(default_factory=GeometricConfig)

    def classify_contour(self, contour: np.ndarray, holes: Sequence[np.ndarray]) -> tuple[ShapeClass, float] | None:
        cfg = self.cfg
        circ = circularity(contour)
        if circ >= cfg.circularity_min:
            round_holes = [circularity(h) for h in holes if circularity(h) >= cfg.hole_circularity_min]
            if round_holes:
                return ShapeClass.RING, _clamp01(min(circ, max(round_holes)))
            return ShapeClass.CIRCLE, _clamp01(circ)
        poly = cv2.approxPolyDP(contour, cfg.epsilon_frac * cv2.arcLength(contour, True), True)
        angles = corner_angles(poly)
        if len(angles) == 3:
            return ShapeClass.TRIANGLE, _clamp01(1 - np.mean([abs(a - 60) for a in angles]) / 60)
        if len(angles) == 4:
            dev = [abs(a - 90) for a in angles]
            if max(dev) <= cfg.right_angle_tol:
                return ShapeClass.RECTANGLE, _clamp01(1 - np.mean(dev) / 90)
        return None

    def detect(self, img: ImageBuffer, stem: str | None = None) -> list[Detection]:
        gray = intensity(img)
        mask = binarize(gray, self.cfg)
        contours, hierarchy = cv2.findContours(mask, cv2.RETR_CCOMP, cv2.CHAIN_APPROX_NONE)
        if hierarchy is None:
            return []
        hierarchy = hierarchy[0]
        out = []
        for i, c in enumerate(contours):
            if hierarchy[i][3] != -1 or cv2.contourArea(c) < self.cfg.min_area:
                continue
            holes = []
            child = hierarchy[i][2]
            while child != -1:
                if cv2.contourArea(contours[child]) >= self.cfg.min_area:
                    holes.append(contours[child])
                child = hierarchy[child][0]
            found = self.classify_contour(c, holes)
            if found is None:
                continue
            x, y, w, h = cv2.boundingRect(c)
            out.append(Detection(BoundingBox(x, y, x + w, y + h), found[0], found[1]))
        return out


def detect_shapes(provider: ShapeDetectionProvider, img: ImageBuffer, stem: str | None = None) -> list[Detection]:
    return provider.detect(img, stem)


# --- SD_overlap -------------------------------------------------------------

def sd_overlap(gts: Sequence[BoundingBox], preds: Sequence[BoundingBox], width: int, height: int) -> float:
    """Fraction of the ground-truth union mask covered by the predicted union mask.

    Empty ground truth counts as fully covered.
    """
    gt = rasterize_union(gts, width, height)
    n = int(gt.sum())
    if n == 0:
        return 1.0
    pred = rasterize_union(preds, width, height)
    return int((gt & pred).sum()) / n


@dataclass
class OverlapSummary:
    per_image: dict[str, float]
    mean: float
    inside: int
    outside: int
    vacuous: list[str]

    def to_dict(self) -> dict:
        return {"per_image": self.per_image, "mean": self.mean, "inside": self.inside,
                "outside": self.outside, "vacuous": self.vacuous}


def _center_pixel(b: BoundingBox, width: int, height: int) -> tuple[int, int]:
    cx, cy = b.center
    return min(int(cx), width - 1), min(int(cy), height - 1)


def batch_sd_overlap(
    gts: Mapping[str, Sequence[BoundingBox]],
    preds: Mapping[str, Sequence[BoundingBox]],
    sizes: Mapping[str, tuple[int, int]],
) -> OverlapSummary:
    """Per-image SD_overlap plus counts of predictions centered inside/outside the GT mask.

    ``sizes`` maps each stem to ``(width, height)``.
    """
    unmatched = sorted(set(gts) ^ set(preds))
    if unmatched:
        raise ValueError(f"stems without a counterpart: {unmatched}")
    per_image, vacuous = {}, []
    inside = outside = 0
    for stem in sorted(gts):
        w, h = sizes[stem]
        per_image[stem] = sd_overlap(gts[stem], preds[stem], w, h)
        if not gts[stem]:
            vacuous.append(stem)
        mask = rasterize_union(gts[stem], w, h)
        for p in preds[stem]:
            x, y = _center_pixel(p, w, h)
            if mask[y, x]:
                inside += 1
            else:
                outside += 1
    mean = float(np.mean(list(per_image.values()))) if per_image else 1.0
    return OverlapSummary(per_image, mean, inside, outside, vacuous)
