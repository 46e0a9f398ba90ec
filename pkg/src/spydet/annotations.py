"""Label and detection text files.

Label lines are ``class_id cx cy w h``; detection lines are
``class_id confidence cx cy w h``. Coordinates are normalized to the frame
and written with six decimals.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Type

from .core import (
    ComponentClass,
    Detection,
    Label,
    MalformedAnnotationError,
    NormalizedBox,
    ShapeClass,
    normalized_to_pixel,
    pixel_to_normalized,
)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def format_label(n: NormalizedBox) -> str:
    return " ".join([str(n.class_id), _fmt(n.cx), _fmt(n.cy), _fmt(n.w), _fmt(n.h)])


def format_detection(n: NormalizedBox, confidence: float) -> str:
    return " ".join([str(n.class_id), _fmt(confidence), _fmt(n.cx), _fmt(n.cy), _fmt(n.w), _fmt(n.h)])


def _parse(path: Path, with_confidence: bool) -> list[tuple[NormalizedBox, float]]:
    out = []
    expected = 6 if with_confidence else 5
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != expected:
                raise ValueError(f"expected {expected} fields, got {len(parts)}")
            cid = int(parts[0])
            nums = [float(p) for p in parts[1:]]
            conf = nums.pop(0) if with_confidence else 1.0
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"confidence {conf} outside [0,1]")
            out.append((NormalizedBox(cid, *nums), conf))
        except (ValueError, MalformedAnnotationError) as exc:
            raise MalformedAnnotationError(f"{path}, line {lineno}: {exc}") from exc
    return out


def read_labels(path: str | Path) -> list[NormalizedBox]:
    return [n for n, _ in _parse(Path(path), with_confidence=False)]


def read_detection_lines(path: str | Path) -> list[tuple[NormalizedBox, float]]:
    return _parse(Path(path), with_confidence=True)


def to_detections(entries: Sequence[tuple[NormalizedBox, float]], width: int, height: int,
                  label_type: Type[ShapeClass] | Type[ComponentClass]) -> list[Detection]:
    out = []
    for n, conf in entries:
        try:
            label = label_type(n.class_id)
        except ValueError as exc:
            raise MalformedAnnotationError(f"unknown {label_type.__name__} id {n.class_id}") from exc
        out.append(Detection(normalized_to_pixel(n, width, height), label, conf))
    return out


def load_labels(path, width: int, height: int, label_type=ComponentClass) -> list[Detection]:
    return to_detections([(n, 1.0) for n in read_labels(path)], width, height, label_type)


def load_detections(path, width: int, height: int, label_type=ComponentClass) -> list[Detection]:
    return to_detections(read_detection_lines(path), width, height, label_type)


def write_labels(path: str | Path, dets: Sequence[Detection], width: int, height: int) -> None:
    lines = [format_label(pixel_to_normalized(d.box, width, height, _label_id(d.label))) for d in dets]
    Path(path).write_text("".join(line + "\n" for line in lines))


def write_detections(path: str | Path, dets: Sequence[Detection], width: int, height: int) -> None:
    lines = [format_detection(pixel_to_normalized(d.box, width, height, _label_id(d.label)), d.confidence)
             for d in dets]
    Path(path).write_text("".join(line + "\n" for line in lines))


def _label_id(label: Label) -> int:
    return label.value


def image_files(directory: str | Path) -> list[Path]:
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
