"""Texture scoring from grayscale variance and histogram entropy.

Per-class histograms of each metric are calibrated from labeled crops and
stored as a lookup table. At query time the bin containing the crop's
metric value is read from every class histogram, the raw frequencies are
normalized across classes, and the result is rebalanced by class size
relative to the solar count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from ..core import ClassScoreVector, ComponentClass, TEXTURE_CLASSES

LUT_FORMAT = "spydet-texture-lut/1"
DOMAINS = {"variance": (0.0, 10000.0), "entropy": (0.0, 8000.0)}
MAX_BINS = 10000
# Object counts of the reference calibration set (antenna, body, solar, thruster).
REFERENCE_OBJECT_COUNTS = {
    ComponentClass.ANTENNA: 741,
    ComponentClass.BODY: 966,
    ComponentClass.SOLAR: 1692,
    ComponentClass.THRUSTER: 320,
}

Metric = Literal["variance", "entropy"]


class CalibrationError(ValueError):
    pass


def _pixels(crop) -> np.ndarray:
    a = np.asarray(getattr(crop, "data", crop))
    if a.size == 0:
        raise ValueError("empty crop")
    return a.ravel()


def variance(crop) -> float:
    """Population variance of the 8-bit intensities (unclamped)."""
    x = _pixels(crop).astype(np.float64)
    return float(np.mean((x - x.mean()) ** 2))


def entropy(crop) -> float:
    """Shannon entropy of the 256-bin intensity histogram, in millibits (0..8000)."""
    counts = np.bincount(_pixels(crop).astype(np.uint8), minlength=256)
    q = counts[counts > 0] / counts.sum()
    return float(-1000.0 * np.sum(q * np.log2(q))) + 0.0


def clamp_to_domain(value: float, metric: Metric) -> float:
    lo, hi = DOMAINS[metric]
    return min(max(value, lo), hi)


def texture_metrics(crop) -> dict[str, float]:
    return {"variance": variance(crop), "entropy": entropy(crop)}


def freedman_diaconis_bins(values: np.ndarray, metric: Metric, mode: str = "count") -> int:
    """Number of uniform bins over the metric domain.

    ``mode="count"`` treats ``2*IQR/n**(1/3)`` directly as the bin count.
    ``mode="width"`` treats it as the bin width and divides the domain by it.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    q75, q25 = np.percentile(values, [75, 25])
    fd = 2.0 * (q75 - q25) / n ** (1.0 / 3.0)
    if mode == "count":
        bins = math.floor(fd + 0.5)
    elif mode == "width":
        lo, hi = DOMAINS[metric]
        bins = math.ceil((hi - lo) / fd) if fd > 0 else 1
    else:
        raise ValueError(f"unknown binning mode {mode!r}")
    return int(min(max(bins, 1), MAX_BINS))


@dataclass(frozen=True)
class ClassHistogram:
    frequencies: np.ndarray  # raw counts per bin
    object_count: int

    @property
    def bin_count(self) -> int:
        return len(self.frequencies)


@dataclass(frozen=True)
class TextureLUT:
    tables: dict[str, dict[ComponentClass, ClassHistogram]]
    reference_class: ComponentClass = ComponentClass.SOLAR

    def domain(self, metric: Metric) -> tuple[float, float]:
        return DOMAINS[metric]

    def object_count(self, cls: ComponentClass) -> int:
        # both metrics are calibrated from the same crops
        return self.tables["variance"][cls].object_count

    def bin_index(self, metric: Metric, cls: ComponentClass, value: float) -> int:
        lo, hi = DOMAINS[metric]
        nb = self.tables[metric][cls].bin_count
        v = clamp_to_domain(value, metric)
        return min(int((v - lo) / (hi - lo) * nb), nb - 1)

    def frequency(self, metric: Metric, cls: ComponentClass, value: float) -> int:
        hist = self.tables[metric][cls]
        return int(hist.frequencies[self.bin_index(metric, cls, value)])

    def to_dict(self) -> dict:
        out = {"format": LUT_FORMAT, "reference_class": self.reference_class.key, "metrics": {}}
        for metric, per_class in self.tables.items():
            lo, hi = DOMAINS[metric]
            out["metrics"][metric] = {
                "domain": [lo, hi],
                "classes": {
                    cls.key: {
                        "bin_count": h.bin_count,
                        "frequencies": [int(v) for v in h.frequencies],
                        "object_count": h.object_count,
                    }
                    for cls, h in per_class.items()
                },
            }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TextureLUT":
        if d.get("format") != LUT_FORMAT:
            raise ValueError(f"unsupported LUT format {d.get('format')!r}")
        by_key = {c.key: c for c in ComponentClass}
        tables: dict[str, dict[ComponentClass, ClassHistogram]] = {}
        for metric in DOMAINS:
            m = d["metrics"][metric]
            if tuple(m["domain"]) != DOMAINS[metric]:
                raise ValueError(f"{metric} domain must be {DOMAINS[metric]}, got {m['domain']}")
            tables[metric] = {}
            for key, entry in m["classes"].items():
                freqs = np.asarray(entry["frequencies"], dtype=np.int64)
                if len(freqs) != entry["bin_count"]:
                    raise ValueError(f"{metric}/{key}: bin_count does not match frequencies")
                tables[metric][by_key[key]] = ClassHistogram(freqs, int(entry["object_count"]))
            missing = [c.key for c in TEXTURE_CLASSES if c not in tables[metric]]
            if missing:
                raise ValueError(f"{metric} table missing classes {missing}")
        return cls(tables, by_key[d.get("reference_class", "solar")])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "TextureLUT":
        return cls.from_dict(json.loads(Path(path).read_text()))


def calibrate_texture_lut(
    samples: Iterable[tuple[object, ComponentClass]],
    binning: str = "count",
    fixed_bins: dict[str, int] | None = None,
) -> TextureLUT:
    """Build per-class histograms from ``(grayscale crop, class)`` pairs.

    Crops labeled with non-texture classes are ignored. ``fixed_bins`` maps a
    metric name to a bin count that overrides the Freedman-Diaconis rule.
    """
    values: dict[str, dict[ComponentClass, list[float]]] = {
        m: {c: [] for c in TEXTURE_CLASSES} for m in DOMAINS
    }
    for crop, cls in samples:
        cls = ComponentClass(cls)
        if cls not in TEXTURE_CLASSES:
            continue
        for metric, v in texture_metrics(crop).items():
            values[metric][cls].append(clamp_to_domain(v, metric))
    return calibrate_from_values(values, binning, fixed_bins)


def calibrate_from_values(
    values: dict[str, dict[ComponentClass, list[float]]],
    binning: str = "count",
    fixed_bins: dict[str, int] | None = None,
) -> TextureLUT:
    fixed_bins = fixed_bins or {}
    tables: dict[str, dict[ComponentClass, ClassHistogram]] = {}
    for metric in DOMAINS:
        lo, hi = DOMAINS[metric]
        tables[metric] = {}
        for cls in TEXTURE_CLASSES:
            vals = np.asarray(values[metric].get(cls, []), dtype=np.float64)
            if vals.size == 0:
                raise CalibrationError(f"no calibration samples for class '{cls.key}'")
            vals = np.clip(vals, lo, hi)
            nb = fixed_bins.get(metric) or freedman_diaconis_bins(vals, metric, binning)
            idx = np.minimum(((vals - lo) / (hi - lo) * nb).astype(np.int64), nb - 1)
            freqs = np.bincount(idx, minlength=nb).astype(np.int64)
            tables[metric][cls] = ClassHistogram(freqs, int(vals.size))
    return TextureLUT(tables)


@dataclass(frozen=True)
class RelativeFrequency:
    values: dict[ComponentClass, float]
    degenerate: bool = False

    def __getitem__(self, cls: ComponentClass) -> float:
        return self.values[cls]


def texture_relative_frequency(lut: TextureLUT, value: float, metric: Metric) -> RelativeFrequency:
    raw = {c: lut.frequency(metric, c, value) for c in TEXTURE_CLASSES}
    total = sum(raw.values())
    if total == 0:
        return RelativeFrequency({c: 0.25 for c in TEXTURE_CLASSES}, degenerate=True)
    return RelativeFrequency({c: f / total for c, f in raw.items()})


def texture_score(rf: RelativeFrequency, object_counts: dict[ComponentClass, int] | TextureLUT) -> ClassScoreVector:
    """Rebalance relative frequencies by ``n_solar / n_class``.

    A degenerate lookup (no class has data in that bin) carries no texture
    evidence and scores zero for every class.
    """
    if isinstance(object_counts, TextureLUT):
        lut = object_counts
        object_counts = {c: lut.object_count(c) for c in TEXTURE_CLASSES}
        ref = object_counts[lut.reference_class]
    else:
        ref = object_counts[ComponentClass.SOLAR]
    if rf.degenerate:
        return ClassScoreVector()
    return ClassScoreVector({c: ref * rf[c] / object_counts[c] for c in TEXTURE_CLASSES})
