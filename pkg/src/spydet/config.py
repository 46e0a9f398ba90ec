"""Pipeline configuration file (YAML).

Example::

    gamma: {enabled: false, value: 0.8}
    roi: {enabled: false, sigma: 3.5, threshold: 10, min_area: 200, pad_frac: 0.05}
    color_space: grayscale
    provider: {kind: geometric}
    geometric: {epsilon_frac: 0.03, circularity_min: 0.8}
    colors: {blue: {h_min: 140, h_max: 180, s_min: 80, v_min: 40}}
    texture: {lut: lut.json}
    syc: {suppress_body: false, radiator_merge: true, unknown_threshold: 0.5}
    fusion: {iou_threshold: 0.5, body_source: yolo}

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .fusion import FusionConfig
from .preprocess import ColorSpace, PreprocessConfig
from .scorers.color import ColorRangeConfig, HSVRange
from .shapedetect import GeometricConfig
from .syc import SycMode


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    provider_kind: str = "geometric"
    provider_path: Path | None = None
    geometric: GeometricConfig = field(default_factory=GeometricConfig)
    colors: ColorRangeConfig = field(default_factory=ColorRangeConfig)
    lut_path: Path | None = None
    syc: SycMode = field(default_factory=SycMode)
    fusion: FusionConfig = field(default_factory=FusionConfig)


_PREPROCESS_KEYS = {
    ("gamma", "enabled"): "gamma_enabled",
    ("gamma", "value"): "gamma",
    ("roi", "enabled"): "roi_enabled",
    ("roi", "sigma"): "roi_blur_sigma",
    ("roi", "threshold"): "roi_threshold",
    ("roi", "min_area"): "roi_min_area",
    ("roi", "pad_frac"): "roi_pad_frac",
}
_TOP_KEYS = {"gamma", "roi", "color_space", "provider", "geometric", "colors", "texture", "syc", "fusion"}


def _section(raw: dict, name: str, allowed: set[str], where: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{where}: '{name}' must be a mapping")
    extra = sorted(set(sec) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(f'{name}.{k}' for k in extra)}")
    return sec


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _resolve(base: Path, value: Any, key: str, where: str) -> Path:
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"{where}: {key} path does not exist: {p}")
    return p


def parse_config(raw: dict | None, base_dir: Path = Path("."), where: str = "<config>") -> PipelineConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    extra = sorted(set(raw) - _TOP_KEYS)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")
    try:
        pre_kwargs: dict[str, Any] = {}
        for sec_name in ("gamma", "roi"):
            allowed = {k for (s, k) in _PREPROCESS_KEYS if s == sec_name}
            for k, v in _section(raw, sec_name, allowed, where).items():
                pre_kwargs[_PREPROCESS_KEYS[(sec_name, k)]] = v
        if "color_space" in raw:
            pre_kwargs["target_color_space"] = ColorSpace(raw["color_space"])
        preprocess = PreprocessConfig(**pre_kwargs)

        prov = _section(raw, "provider", {"kind", "path"}, where)
        kind = prov.get("kind", "geometric")
        if kind not in ("geometric", "replay"):
            raise ConfigError(f"{where}: provider.kind must be 'geometric' or 'replay', got {kind!r}")
        prov_path = None
        if kind == "replay":
            if "path" not in prov:
                raise ConfigError(f"{where}: provider.path is required for replay")
            prov_path = _resolve(base_dir, prov["path"], "provider.path", where)

        geometric = GeometricConfig(**_section(raw, "geometric", _field_names(GeometricConfig), where))

        colors_raw = _section(raw, "colors", set(ColorRangeConfig().ranges), where)
        for name, spec in colors_raw.items():
            bad = sorted(set(spec) - _field_names(HSVRange))
            if bad:
                raise ConfigError(f"{where}: unknown key(s) {', '.join(f'colors.{name}.{k}' for k in bad)}")
        colors = ColorRangeConfig.from_dict(colors_raw)

        tex = _section(raw, "texture", {"lut"}, where)
        lut_path = _resolve(base_dir, tex["lut"], "texture.lut", where) if "lut" in tex else None

        syc = SycMode(**_section(raw, "syc", _field_names(SycMode), where))
        fusion = FusionConfig(**_section(raw, "fusion", _field_names(FusionConfig), where))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return PipelineConfig(preprocess, kind, prov_path, geometric, colors, lut_path, syc, fusion)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return parse_config(raw, p.parent, str(p))
