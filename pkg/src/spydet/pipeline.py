"""End-to-end detection: preprocess, find shapes, classify them as components."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .config import ConfigError, PipelineConfig
from .core import ComponentClass, Detection
from .preprocess import ColorSpace, ImageBuffer, preprocess, to_rgb
from .scorers.texture import TextureLUT
from .shapedetect import GeometricProvider, ReplayProvider, ShapeDetectionProvider
from .syc import ScorerBundle, classify_detections


@dataclass
class FrameResult:
    shapes: list[Detection]
    components: list[Detection]


class Pipeline:
    def __init__(self, cfg: PipelineConfig, lut: TextureLUT | None = None):
        if lut is None:
            if cfg.lut_path is None:
                raise ConfigError("texture.lut is required to classify detections")
            lut = TextureLUT.load(cfg.lut_path)
        self.cfg = cfg
        self.bundle = ScorerBundle(lut, cfg.colors)
        self.provider: ShapeDetectionProvider
        if cfg.provider_kind == "replay":
            self.provider = ReplayProvider(cfg.provider_path)
        else:
            self.provider = GeometricProvider(cfg.geometric)

    def detect_shapes(self, image: ImageBuffer, stem: str | None = None) -> list[Detection]:
        if isinstance(self.provider, ReplayProvider):
            # replayed detections already refer to the original frame
            return self.provider.detect(image, stem)
        pre = preprocess(image, self.cfg.preprocess)
        dx, dy = pre.offset
        return [Detection(d.box.translate(dx, dy), d.label, d.confidence)
                for d in self.provider.detect(pre.image, stem)]

    def process(self, image: ImageBuffer, stem: str | None = None) -> FrameResult:
        shapes = self.detect_shapes(image, stem)
        return FrameResult(shapes, classify_detections(shapes, image, self.bundle, self.cfg.syc))


COLORS = {
    ComponentClass.ANTENNA: (255, 200, 0),
    ComponentClass.BODY: (0, 200, 255),
    ComponentClass.SOLAR: (60, 120, 255),
    ComponentClass.THRUSTER: (255, 80, 80),
    ComponentClass.WHITE_RADIATOR: (255, 255, 255),
    ComponentClass.UNKNOWN: (160, 160, 160),
}


def draw_overlay(image: ImageBuffer, dets: list[Detection]) -> ImageBuffer:
    """Copy of ``image`` with labeled boxes drawn on it."""
    canvas = np.ascontiguousarray(to_rgb(image).data.copy())
    for d in dets:
        color = COLORS.get(d.label, (0, 255, 0))
        b = d.box
        cv2.rectangle(canvas, (b.x_min, b.y_min), (b.x_max - 1, b.y_max - 1), color, 2)
        text = f"{d.label.name.lower()} {d.confidence:.2f}"
        cv2.putText(canvas, text, (b.x_min, max(b.y_min - 4, 10)), cv2.FONT_HERSHEY_SIMPLEX, 0.4, color, 1,
                    cv2.LINE_AA)
    return ImageBuffer(canvas, ColorSpace.RGB)
