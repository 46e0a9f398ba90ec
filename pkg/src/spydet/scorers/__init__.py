"""Shape, color and texture feature scorers."""

from .color import COLOR_NAMES, ColorPercentages, ColorRangeConfig, HSVRange, color_percentages, color_score
from .shape import SHAPE_SCORE_TABLE, shape_score
from .texture import (
    REFERENCE_OBJECT_COUNTS,
    CalibrationError,
    RelativeFrequency,
    TextureLUT,
    calibrate_texture_lut,
    entropy,
    freedman_diaconis_bins,
    texture_relative_frequency,
    texture_score,
    variance,
)

__all__ = [
    "COLOR_NAMES", "ColorPercentages", "ColorRangeConfig", "HSVRange", "color_percentages", "color_score",
    "SHAPE_SCORE_TABLE", "shape_score",
    "REFERENCE_OBJECT_COUNTS", "CalibrationError", "RelativeFrequency", "TextureLUT",
    "calibrate_texture_lut", "entropy", "freedman_diaconis_bins", "texture_relative_frequency",
    "texture_score", "variance",
]
