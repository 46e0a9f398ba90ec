"""Merge a data-driven component detector's boxes with the context-based ones."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BoundingBox, ComponentClass, Detection, iou


@dataclass(frozen=True)
class FusionConfig:
    iou_threshold: float = 0.5
    body_source: str = "yolo"  # "yolo" (data-driven) or "spy"

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.body_source not in ("yolo", "spy"):
            raise ValueError(f"body_source must be 'yolo' or 'spy', got {self.body_source!r}")


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def merge_pair(a: Detection, b: Detection) -> Detection:
    """Confidence-weighted box average; class from the more confident member.

    Averaging the corners is the same as averaging centers and sizes, and
    keeps every rounded edge between the two inputs.
    """
    ca, cb = a.confidence, b.confidence
    wa = 0.5 if ca + cb == 0 else ca / (ca + cb)
    wb = 1.0 - wa
    corners = [wa * p + wb * q for p, q in zip(a.box.as_tuple(), b.box.as_tuple())]
    box = BoundingBox(*(_round(v) for v in corners))
    label = a.label if ca >= cb else b.label
    return Detection(box, label, (ca + cb) / 2)


def fuse(yolo_dets: list[Detection], spy_dets: list[Detection], cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    """Fuse two detection lists for one frame.

    Body boxes come only from ``cfg.body_source`` and are never paired. The
    remaining boxes pair greedily by descending IoU (each box at most once)
    when IoU exceeds the threshold; unpaired boxes pass through. Output keeps
    the YOLO order, with merged boxes in place of their YOLO member, followed
    by the unpaired SpY boxes.
    """
    body = ComponentClass.BODY
    keep_yolo_body = cfg.body_source == "yolo"
    ys = [d for d in yolo_dets if d.label != body]
    ss = [d for d in spy_dets if d.label != body]

    candidates = []
    for i, y in enumerate(ys):
        for j, s in enumerate(ss):
            ov = iou(y.box, s.box)
            if ov > cfg.iou_threshold:
                candidates.append((-ov, i, j))
    candidates.sort()

    partner: dict[int, int] = {}
    used_s: set[int] = set()
    for _, i, j in candidates:
        if i in partner or j in used_s:
            continue
        partner[i] = j
        used_s.add(j)

    out = []
    i = 0
    for d in yolo_dets:
        if d.label == body:
            if keep_yolo_body:
                out.append(d)
            continue
        out.append(merge_pair(d, ss[partner[i]]) if i in partner else d)
        i += 1
    for d in spy_dets:
        if d.label == body and not keep_yolo_body:
            out.append(d)
    out += [d for j, d in enumerate(ss) if j not in used_s]
    return out
