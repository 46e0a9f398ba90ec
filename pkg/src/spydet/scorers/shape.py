"""Shape class scores: 2 marks the likeliest components for a shape, 1 means "could be anything"."""

from __future__ import annotations

from ..core import ClassScoreVector, ComponentClass as C, ShapeClass

# Columns: antenna, body, solar, thruster, unknown. White radiator is not
# scored by shape and always gets 1.
SHAPE_SCORE_TABLE: dict[ShapeClass, dict[C, int]] = {
    ShapeClass.CIRCLE: {C.ANTENNA: 2, C.BODY: 1, C.SOLAR: 1, C.THRUSTER: 1, C.UNKNOWN: 1},
    ShapeClass.RECTANGLE: {C.ANTENNA: 1, C.BODY: 2, C.SOLAR: 2, C.THRUSTER: 1, C.UNKNOWN: 1},
    ShapeClass.TRIANGLE: {C.ANTENNA: 1, C.BODY: 1, C.SOLAR: 1, C.THRUSTER: 2, C.UNKNOWN: 1},
    ShapeClass.RING: {C.ANTENNA: 2, C.BODY: 1, C.SOLAR: 2, C.THRUSTER: 2, C.UNKNOWN: 1},
}


def shape_score(shape: ShapeClass) -> ClassScoreVector:
    row = dict(SHAPE_SCORE_TABLE[ShapeClass(shape)])
    row[C.WHITE_RADIATOR] = 1
    return ClassScoreVector(row)
