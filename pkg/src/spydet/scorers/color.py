"""HSV color segmentation and color class scores."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ClassScoreVector, ComponentClass as C

COLOR_NAMES = ("blue", "white", "silver", "gray1", "gray2", "black")


@dataclass(frozen=True)
class HSVRange:
    """Inclusive HSV box on the 0..255 scale. ``h_min > h_max`` wraps through 0."""

    h_min: int = 0
    h_max: int = 255
    s_min: int = 0
    s_max: int = 255
    v_min: int = 0
    v_max: int = 255

    def __post_init__(self):
        for lo, hi, name in ((self.s_min, self.s_max, "s"), (self.v_min, self.v_max, "v")):
            if not 0 <= lo <= hi <= 255:
                raise ValueError(f"bad {name} range [{lo}, {hi}]")
        if not (0 <= self.h_min <= 255 and 0 <= self.h_max <= 255):
            raise ValueError(f"bad hue range [{self.h_min}, {self.h_max}]")

    def mask(self, hsv: np.ndarray) -> np.ndarray:
        h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
        if self.h_min <= self.h_max:
            hm = (h >= self.h_min) & (h <= self.h_max)
        else:
            hm = (h >= self.h_min) | (h <= self.h_max)
        return hm & (s >= self.s_min) & (s <= self.s_max) & (v >= self.v_min) & (v <= self.v_max)


def _default_ranges() -> dict[str, HSVRange]:
    return {
        "blue": HSVRange(h_min=140, h_max=180, s_min=80, v_min=40),
        "white": HSVRange(s_max=30, v_min=200),
        "silver": HSVRange(s_max=30, v_min=140, v_max=200),
        "gray1": HSVRange(s_max=40, v_min=90, v_max=140),
        "gray2": HSVRange(s_max=40, v_min=50, v_max=90),
        "black": HSVRange(v_max=49),
    }


@dataclass(frozen=True)
class ColorRangeConfig:
    ranges: dict[str, HSVRange] = field(default_factory=_default_ranges)

    def __post_init__(self):
        missing = set(COLOR_NAMES) - set(self.ranges)
        extra = set(self.ranges) - set(COLOR_NAMES)
        if missing or extra:
            raise ValueError(f"color ranges must name exactly {COLOR_NAMES}; "
                             f"missing={sorted(missing)} extra={sorted(extra)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ColorRangeConfig":
        ranges = _default_ranges()
        for name, spec in d.items():
            if name not in COLOR_NAMES:
                raise ValueError(f"unknown color '{name}'")
            ranges[name] = HSVRange(**spec)
        return cls(ranges)


@dataclass(frozen=True)
class ColorPercentages:
    fractions: dict[str, float]
    unmatched: float

    def __getitem__(self, name: str) -> float:
        return self.fractions[name]

    def dominant(self) -> str | None:
        """Color with the largest share, or None when no pixel matched any range.

        Ties go to the earlier color in precedence order.
        """
        best = max(COLOR_NAMES, key=lambda n: (self.fractions[n], -COLOR_NAMES.index(n)))
        return best if self.fractions[best] > 0 else None


def color_percentages(hsv_crop: np.ndarray, ranges: ColorRangeConfig | None = None) -> ColorPercentages:
    ranges = ranges or ColorRangeConfig()
    if hsv_crop.size == 0:
        raise ValueError("empty crop")
    pix = hsv_crop.reshape(-1, 3)
    n = pix.shape[0]
    claimed = np.zeros(n, dtype=bool)
    fractions = {}
    for name in COLOR_NAMES:
        m = ranges.ranges[name].mask(pix) & ~claimed
        claimed |= m
        fractions[name] = int(m.sum()) / n
    return ColorPercentages(fractions, (n - int(claimed.sum())) / n)


def color_score(p: ColorPercentages | dict[str, float], radiator_merge: bool = True) -> ClassScoreVector:
    if isinstance(p, ColorPercentages):
        p = p.fractions
    scores = {
        C.ANTENNA: (p["silver"] + p["gray1"]) / 2,
        C.BODY: (p["silver"] + p["gray1"] + p["gray2"]) / 3,
        C.SOLAR: p["blue"],
        # silver + gray2, per the thruster color assignment
        C.THRUSTER: (p["silver"] + p["gray2"]) / 2,
        C.WHITE_RADIATOR: p["white"],
        C.UNKNOWN: p["black"],
    }
    if radiator_merge and p["white"] > 0.5:
        scores[C.SOLAR] += scores[C.WHITE_RADIATOR]
        scores[C.WHITE_RADIATOR] = 0.0
    return ClassScoreVector(scores)
