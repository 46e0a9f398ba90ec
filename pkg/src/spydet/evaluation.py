"""Detection metrics: greedy matching, P/R/F1, all-points AP, mAP@0.5 and misclassification counts."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import ComponentClass, Detection, iou

MAP_CLASSES = (
    ComponentClass.ANTENNA,
    ComponentClass.BODY,
    ComponentClass.SOLAR,
    ComponentClass.THRUSTER,
)


@dataclass
class MatchResult:
    det_tp: list[bool]
    det_gt: list[int | None]
    gt_matched: list[bool]

    @property
    def tp(self) -> int:
        return sum(self.det_tp)

    @property
    def fp(self) -> int:
        return len(self.det_tp) - self.tp

    @property
    def fn(self) -> int:
        return self.gt_matched.count(False)


def confidence_order(dets: Sequence[Detection]) -> list[int]:
    # stable sort keeps input order among equal confidences
    return sorted(range(len(dets)), key=lambda i: -dets[i].confidence)


def _greedy(dets, gts, iou_threshold, det_ids, gt_ids, same_class: bool):
    taken: set[int] = set()
    pairs = {}
    for di in det_ids:
        d = dets[di]
        best, best_iou = None, -1.0
        for gi in gt_ids:
            if gi in taken:
                continue
            if same_class and gts[gi].label != d.label:
                continue
            ov = iou(d.box, gts[gi].box)
            if ov >= iou_threshold and ov > best_iou:
                best, best_iou = gi, ov
        if best is not None:
            taken.add(best)
            pairs[di] = best
    return pairs


def match_detections(dets: Sequence[Detection], gts: Sequence[Detection], iou_threshold: float = 0.5) -> MatchResult:
    """One-to-one, class-aware, greedy in descending confidence."""
    pairs = _greedy(dets, gts, iou_threshold, confidence_order(dets), range(len(gts)), same_class=True)
    det_gt = [pairs.get(i) for i in range(len(dets))]
    matched = [False] * len(gts)
    for g in pairs.values():
        matched[g] = True
    return MatchResult([g is not None for g in det_gt], det_gt, matched)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def precision_recall_f1(tp: int, fp: int, fn: int) -> PRF:
    p = tp / (tp + fp) if tp + fp else 0.0
    if tp + fn:
        r = tp / (tp + fn)
    else:
        r = 1.0 if tp + fp == 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)


def average_precision(scored: Iterable[tuple[float, bool]], n_gt: int) -> float:
    """Area under the precision envelope (all-points interpolation).

    ``scored`` holds ``(confidence, is_tp)`` for every detection of one class
    across the dataset, in a deterministic order used for tie-breaking.
    """
    if n_gt <= 0:
        raise ValueError("average precision is undefined without ground truth")
    scored = list(scored)
    if not scored:
        return 0.0
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])
    hits = np.array([scored[i][1] for i in order], dtype=np.float64)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = np.concatenate([[0.0], tp / n_gt, [1.0]])
    precision = np.concatenate([[0.0], tp / (tp + fp), [0.0]])
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.nonzero(recall[1:] != recall[:-1])[0]
    return float(np.sum((recall[steps + 1] - recall[steps]) * precision[steps + 1]))


def mean_average_precision(aps: dict) -> float:
    if not aps:
        return 0.0
    return float(np.mean(list(aps.values())))


def misclassification_count(
    dets: Sequence[Detection],
    gts: Sequence[Detection],
    iou_threshold: float = 0.5,
    exclude: Iterable[ComponentClass] = (),
    count_unknown: bool = False,
) -> int:
    """Cross-class hits left over after class-aware matching.

    Detections and ground truth with a label in ``exclude`` are removed first.
    Unknown detections are abstentions and are not counted unless
    ``count_unknown`` is set.
    """
    exclude = set(exclude)
    dets = [d for d in dets if d.label not in exclude]
    gts = [g for g in gts if g.label not in exclude]
    first = match_detections(dets, gts, iou_threshold)
    free_dets = [i for i in confidence_order(dets)
                 if not first.det_tp[i] and (count_unknown or dets[i].label != ComponentClass.UNKNOWN)]
    free_gts = [g for g, m in enumerate(first.gt_matched) if not m]
    pairs = _greedy(dets, gts, iou_threshold, free_dets, free_gts, same_class=False)
    return sum(1 for d, g in pairs.items() if dets[d].label != gts[g].label)


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    ap: float | None


@dataclass
class EvalReport:
    per_class: dict[str, ClassMetrics]
    overall: PRF
    totals: dict[str, int]
    map50: float
    map_classes: list[str]
    misclassifications: dict[str, int]
    notes: list[str] = field(default_factory=list)
    sd_overlap: dict | None = None

    def to_dict(self) -> dict:
        return {
            "overall": {**self.overall.__dict__, **self.totals, "map50": self.map50},
            "map_classes": self.map_classes,
            "per_class": {k: v.__dict__ for k, v in self.per_class.items()},
            "misclassifications": self.misclassifications,
            "sd_overlap": self.sd_overlap,
            "notes": self.notes,
        }

    def table(self) -> str:
        lines = [f"{'class':<15}{'P':>8}{'R':>8}{'F1':>8}{'AP':>8}{'TP':>6}{'FP':>6}{'FN':>6}"]
        for name, m in self.per_class.items():
            ap = f"{m.ap:.3f}" if m.ap is not None else "-"
            lines.append(f"{name:<15}{m.precision:>8.3f}{m.recall:>8.3f}{m.f1:>8.3f}{ap:>8}"
                         f"{m.tp:>6}{m.fp:>6}{m.fn:>6}")
        o = self.overall
        lines.append(f"{'overall':<15}{o.precision:>8.3f}{o.recall:>8.3f}{o.f1:>8.3f}{self.map50:>8.3f}"
                     f"{self.totals['tp']:>6}{self.totals['fp']:>6}{self.totals['fn']:>6}")
        lines.append(f"misclassifications: all={self.misclassifications['all']} "
                     f"no_body={self.misclassifications['no_body']}")
        if self.sd_overlap is not None:
            lines.append(f"SD_overlap mean={self.sd_overlap['mean']:.3f} "
                         f"inside={self.sd_overlap['inside']} outside={self.sd_overlap['outside']}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def evaluate(
    frames: Sequence[tuple[Sequence[Detection], Sequence[Detection]]],
    iou_threshold: float = 0.5,
    map_classes: Sequence[ComponentClass] = MAP_CLASSES,
    count_unknown_misclassification: bool = False,
) -> EvalReport:
    """Evaluate ``(detections, ground_truth)`` pairs, one per image."""
    counts = defaultdict(lambda: [0, 0, 0])
    scored = defaultdict(list)
    n_gt = defaultdict(int)
    mis_all = mis_nobody = 0
    for dets, gts in frames:
        mr = match_detections(dets, gts, iou_threshold)
        for d, hit in zip(dets, mr.det_tp):
            counts[d.label][0 if hit else 1] += 1
            scored[d.label].append((d.confidence, hit))
        for g, hit in zip(gts, mr.gt_matched):
            n_gt[g.label] += 1
            if not hit:
                counts[g.label][2] += 1
        mis_all += misclassification_count(dets, gts, iou_threshold,
                                           count_unknown=count_unknown_misclassification)
        mis_nobody += misclassification_count(dets, gts, iou_threshold, exclude=[ComponentClass.BODY],
                                              count_unknown=count_unknown_misclassification)

    per_class = {}
    aps = {}
    notes = []
    for cls in sorted(set(counts) | set(n_gt), key=lambda c: (type(c).__name__, c.value)):
        tp, fp, fn = counts[cls]
        prf = precision_recall_f1(tp, fp, fn)
        ap = average_precision(scored[cls], n_gt[cls]) if n_gt[cls] else None
        per_class[cls.name.lower()] = ClassMetrics(tp, fp, fn, prf.precision, prf.recall, prf.f1, ap)
    for cls in map_classes:
        if n_gt[cls]:
            aps[cls] = per_class[cls.name.lower()].ap
        else:
            notes.append(f"class '{cls.name.lower()}' absent from ground truth; excluded from mAP")
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    return EvalReport(
        per_class=per_class,
        overall=precision_recall_f1(tp, fp, fn),
        totals={"tp": tp, "fp": fp, "fn": fn},
        map50=mean_average_precision(aps),
        map_classes=[c.name.lower() for c in aps],
        misclassifications={"all": mis_all, "no_body": mis_nobody},
        notes=notes,
    )
