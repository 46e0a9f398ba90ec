"""Rule-based component classifier.

Each shape box gets shape, color, variance and entropy score vectors. Two
votes combine them (soft voting and multiplicative voting) and a fixed
decision ladder picks the final component class, falling back to Unknown
when the evidence points at background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ClassScoreVector, ComponentClass, Detection, ShapeClass
from .preprocess import ColorSpace, ImageBuffer, convert_color_space, intensity
from .scorers.color import ColorPercentages, ColorRangeConfig, color_percentages, color_score
from .scorers.shape import shape_score
from .scorers.texture import TextureLUT, texture_metrics, texture_relative_frequency, texture_score


@dataclass(frozen=True)
class SycMode:
    suppress_body: bool = False
    radiator_merge: bool = True
    unknown_threshold: float = 0.5


def psv(s: ClassScoreVector, c: ClassScoreVector, v: ClassScoreVector, e: ClassScoreVector) -> ClassScoreVector:
    return ClassScoreVector(s.values * (c.values + v.values + e.values))


def muv(s: ClassScoreVector, c: ClassScoreVector, v: ClassScoreVector, e: ClassScoreVector) -> ClassScoreVector:
    return ClassScoreVector(s.values * (v.values + e.values) * c.values)


@dataclass(frozen=True)
class VotingResult:
    psv: ClassScoreVector
    muv: ClassScoreVector
    psv_norm: ClassScoreVector
    muv_norm: ClassScoreVector
    p: ComponentClass
    m: ComponentClass
    pp: float
    mp: float

    @classmethod
    def from_scores(cls, s, c, v, e) -> "VotingResult":
        pv, mv = psv(s, c, v, e), muv(s, c, v, e)
        pn, mn = pv.normalized(), mv.normalized()
        # an all-zero vote carries no information: report it as Unknown
        p = pn.argmax() if pv.total() > 0 else ComponentClass.UNKNOWN
        m = mn.argmax() if mv.total() > 0 else ComponentClass.UNKNOWN
        return cls(pv, mv, pn, mn, p, m, float(pn.values.max()), float(mn.values.max()))


def classify(
    vote: VotingResult,
    color_pct: ColorPercentages,
    variance_scores: ClassScoreVector,
    mode: SycMode = SycMode(),
) -> ComponentClass:
    U = ComponentClass.UNKNOWN
    t = mode.unknown_threshold
    if vote.p is U and vote.pp > t:
        out = U
    elif vote.m is U and vote.mp > t:
        out = U
    elif color_pct.dominant() == "blue":
        out = ComponentClass.SOLAR
    elif vote.p is ComponentClass.THRUSTER:
        out = ComponentClass.THRUSTER
    elif vote.p is ComponentClass.ANTENNA and vote.pp > vote.mp:
        out = ComponentClass.ANTENNA
    elif variance_scores.total() > 0 and variance_scores.argmax() is ComponentClass.SOLAR:
        out = ComponentClass.SOLAR
    else:
        out = vote.m
    if mode.suppress_body and out is ComponentClass.BODY:
        out = U
    return out


@dataclass(frozen=True)
class ScorerBundle:
    lut: TextureLUT
    colors: ColorRangeConfig = field(default_factory=ColorRangeConfig)


@dataclass(frozen=True)
class BoxScores:
    shape: ClassScoreVector
    color: ClassScoreVector
    variance: ClassScoreVector
    entropy: ClassScoreVector
    color_pct: ColorPercentages
    metrics: dict[str, float]
    texture_degenerate: dict[str, bool]


def score_crop(rgb_crop: ImageBuffer, shape: ShapeClass, bundle: ScorerBundle, mode: SycMode = SycMode()) -> BoxScores:
    hsv = convert_color_space(rgb_crop, ColorSpace.HSV).data
    pct = color_percentages(hsv, bundle.colors)
    gray = intensity(rgb_crop)
    metrics = texture_metrics(gray)
    vr = texture_relative_frequency(bundle.lut, metrics["variance"], "variance")
    er = texture_relative_frequency(bundle.lut, metrics["entropy"], "entropy")
    return BoxScores(
        shape=shape_score(shape),
        color=color_score(pct, mode.radiator_merge),
        variance=texture_score(vr, bundle.lut),
        entropy=texture_score(er, bundle.lut),
        color_pct=pct,
        metrics=metrics,
        texture_degenerate={"variance": vr.degenerate, "entropy": er.degenerate},
    )


def classify_scores(scores: BoxScores, mode: SycMode = SycMode()) -> ComponentClass:
    vote = VotingResult.from_scores(scores.shape, scores.color, scores.variance, scores.entropy)
    return classify(vote, scores.color_pct, scores.variance, mode)


def classify_detections(
    detections: list[Detection],
    image: ImageBuffer,
    bundle: ScorerBundle,
    mode: SycMode = SycMode(),
) -> list[Detection]:
    """Label shape detections with component classes.

    ``image`` must be the original frame, before any preprocessing.
    """
    if image.color_space is not ColorSpace.RGB:
        image = convert_color_space(image, ColorSpace.RGB)
    out = []
    for det in detections:
        scores = score_crop(image.crop(det.box), ShapeClass(det.label), bundle, mode)
        out.append(Detection(det.box, classify_scores(scores, mode), det.confidence))
    return out

