"""Shared geometric and detection types.

Boxes live in pixel space using a half-open convention: a box covers
columns ``[x_min, x_max)`` and rows ``[y_min, y_max)``, so its area equals
the popcount of its rasterized mask.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np


class MalformedAnnotationError(ValueError):
    """A label or detection cannot be turned into a valid pixel box."""


class ShapeClass(enum.Enum):
    CIRCLE = 0
    RECTANGLE = 1
    TRIANGLE = 2
    RING = 3


class ComponentClass(enum.Enum):
    ANTENNA = 0
    BODY = 1
    SOLAR = 2
    THRUSTER = 3
    WHITE_RADIATOR = 4
    UNKNOWN = 5

    @property
    def key(self) -> str:
        return self.name.lower()


# Fixed order used for vectors and for argmax tie-breaking.
COMPONENT_ORDER = tuple(ComponentClass)
TEXTURE_CLASSES = (
    ComponentClass.ANTENNA,
    ComponentClass.BODY,
    ComponentClass.SOLAR,
    ComponentClass.THRUSTER,
)

Label = Union[ShapeClass, ComponentClass]


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True, order=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if min(self.x_min, self.y_min) < 0:
            raise ValueError(f"negative coordinate in {self}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and self.x_max >= other.x_max
            and self.y_max >= other.y_max
        )

    def translate(self, dx: int, dy: int) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    @classmethod
    def from_float(cls, x0: float, y0: float, x1: float, y1: float,
                   width: int | None = None, height: int | None = None) -> "BoundingBox":
        """Round float corners to the nearest pixel and clip to the frame if given."""
        xs = [_round_half_up(x0), _round_half_up(x1)]
        ys = [_round_half_up(y0), _round_half_up(y1)]
        xs[0], ys[0] = max(xs[0], 0), max(ys[0], 0)
        if width is not None:
            xs[1] = min(xs[1], width)
        if height is not None:
            ys[1] = min(ys[1], height)
        return cls(xs[0], ys[0], xs[1], ys[1])


@dataclass(frozen=True)
class NormalizedBox:
    """File-boundary representation: center and extent as frame fractions."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise MalformedAnnotationError(f"center outside [0,1]: {self}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise MalformedAnnotationError(f"extent outside (0,1]: {self}")


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: Label
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


class ClassScoreVector:
    """Non-negative score per component class, stored in ``COMPONENT_ORDER``."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[ComponentClass, float] | Iterable[float] | None = None):
        arr = np.zeros(len(COMPONENT_ORDER), dtype=np.float64)
        if isinstance(values, Mapping):
            for cls, v in values.items():
                arr[ComponentClass(cls).value] = v
        elif values is not None:
            arr[:] = np.asarray(list(values), dtype=np.float64)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError(f"scores must be finite and non-negative: {arr}")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __getitem__(self, cls: ComponentClass) -> float:
        return float(self._values[ComponentClass(cls).value])

    def as_dict(self) -> dict[str, float]:
        return {c.key: float(self._values[c.value]) for c in COMPONENT_ORDER}

    def total(self) -> float:
        return float(self._values.sum())

    def argmax(self) -> ComponentClass:
        # np.argmax returns the first maximum, which is the fixed tie-break order
        return COMPONENT_ORDER[int(np.argmax(self._values))]

    def normalized(self) -> "ClassScoreVector":
        s = self.total()
        if s == 0:
            return ClassScoreVector()
        return ClassScoreVector(self._values / s)

    def __eq__(self, other):
        return isinstance(other, ClassScoreVector) and np.array_equal(self._values, other._values)

    def __repr__(self):
        inner = ", ".join(f"{k}={v:.4g}" for k, v in self.as_dict().items())
        return f"ClassScoreVector({inner})"


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def normalized_to_pixel(n: NormalizedBox, width: int, height: int) -> BoundingBox:
    if width <= 0 or height <= 0:
        raise ValueError("frame dimensions must be positive")
    x0 = (n.cx - n.w / 2) * width
    x1 = (n.cx + n.w / 2) * width
    y0 = (n.cy - n.h / 2) * height
    y1 = (n.cy + n.h / 2) * height
    try:
        return BoundingBox.from_float(x0, y0, x1, y1, width, height)
    except ValueError as exc:
        raise MalformedAnnotationError(f"{n} collapses in {width}x{height} frame") from exc


def pixel_to_normalized(box: BoundingBox, width: int, height: int, class_id: int = 0) -> NormalizedBox:
    return NormalizedBox(
        class_id,
        (box.x_min + box.x_max) / (2 * width),
        (box.y_min + box.y_max) / (2 * height),
        box.width / width,
        box.height / height,
    )


def rasterize_union(boxes: Iterable[BoundingBox], width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for b in boxes:
        mask[b.y_min:b.y_max, b.x_min:b.x_max] = True
    return mask
