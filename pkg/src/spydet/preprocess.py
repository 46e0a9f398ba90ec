"""Image conditioning applied before shape detection.

Each block (gamma, ROI, color space) is independently switchable through
:class:`PreprocessConfig`. All functions are pure and return new buffers.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .core import BoundingBox

log = logging.getLogger(__name__)


class ColorSpace(str, enum.Enum):
    RGB = "rgb"
    HSV = "hsv"
    YCBCR = "ycbcr"
    GRAYSCALE = "grayscale"


class ConfigurationError(ValueError):
    pass


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class ImageBuffer:
    data: np.ndarray
    color_space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        d = self.data
        if d.dtype != np.uint8:
            raise TypeError(f"expected uint8 pixels, got {d.dtype}")
        gray = self.color_space is ColorSpace.GRAYSCALE
        if gray and d.ndim != 2:
            raise ValueError("grayscale buffers must be 2-D")
        if not gray and (d.ndim != 3 or d.shape[2] != 3):
            raise ValueError(f"{self.color_space.value} buffers must be HxWx3")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def crop(self, box: BoundingBox) -> "ImageBuffer":
        return ImageBuffer(self.data[box.y_min:box.y_max, box.x_min:box.x_max], self.color_space)


def read_image(path: str | Path) -> ImageBuffer:
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise OSError(f"cannot read image: {path}")
    return ImageBuffer(np.ascontiguousarray(bgr[:, :, ::-1]), ColorSpace.RGB)


def write_image(path: str | Path, img: ImageBuffer) -> None:
    rgb = to_rgb(img).data
    if not cv2.imwrite(str(path), np.ascontiguousarray(rgb[:, :, ::-1])):
        raise OSError(f"cannot write image: {path}")


@dataclass(frozen=True)
class PreprocessConfig:
    gamma_enabled: bool = False
    gamma: float = 0.8
    roi_enabled: bool = False
    roi_blur_sigma: float = 3.5
    roi_threshold: int = 10
    roi_min_area: float = 200.0
    roi_pad_frac: float = 0.05
    target_color_space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.roi_blur_sigma <= 0:
            raise ConfigurationError(f"roi sigma must be positive, got {self.roi_blur_sigma}")
        if not 0 <= self.roi_threshold <= 255:
            raise ConfigurationError("roi threshold must be in 0..255")
        if self.roi_pad_frac < 0:
            raise ConfigurationError("roi padding must be non-negative")


def gamma_table(gamma: float) -> np.ndarray:
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    if gamma == 1:
        return np.arange(256, dtype=np.uint8)
    v = np.arange(256, dtype=np.float64) / 255.0
    return np.floor(255.0 * v ** gamma + 0.5).astype(np.uint8)


def gamma_correct(img: ImageBuffer, gamma: float) -> ImageBuffer:
    return ImageBuffer(gamma_table(gamma)[img.data], img.color_space)


# --- color spaces -----------------------------------------------------------

def _clip_u8(a: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)


def _rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    return _clip_u8(0.299 * r + 0.587 * g + 0.114 * b)


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return _clip_u8(np.stack([y, cb, cr], axis=-1))


def _ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = (ycc[..., i].astype(np.float64) for i in range(3))
    cb -= 128.0
    cr -= 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return _clip_u8(np.stack([r, g, b], axis=-1))


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """HSV with all three channels on 0..255 (hue spans 0..360 degrees)."""
    f = rgb.astype(np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    mx = f.max(axis=-1)
    mn = f.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)
    hue = np.where(
        mx == r, ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(delta == 0, 0.0, hue * 60.0)
    sat = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx))
    h8 = np.floor(hue * 255.0 / 360.0 + 0.5) % 256
    return np.stack([h8, _clip_u8(sat * 255.0), mx], axis=-1).astype(np.uint8)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    f = hsv.astype(np.float64)
    h = f[..., 0] * 360.0 / 255.0 / 60.0
    s = f[..., 1] / 255.0
    v = f[..., 2]
    c = v * s
    x = c * (1 - np.abs(h % 2 - 1))
    m = v - c
    sector = np.floor(h).astype(int) % 6
    zeros = np.zeros_like(c)
    table = [(c, x, zeros), (x, c, zeros), (zeros, c, x), (zeros, x, c), (x, zeros, c), (c, zeros, x)]
    out = np.zeros(f.shape, dtype=np.float64)
    for k, (rr, gg, bb) in enumerate(table):
        sel = sector == k
        out[..., 0] = np.where(sel, rr, out[..., 0])
        out[..., 1] = np.where(sel, gg, out[..., 1])
        out[..., 2] = np.where(sel, bb, out[..., 2])
    return _clip_u8(out + m[..., None])


def to_rgb(img: ImageBuffer) -> ImageBuffer:
    cs = img.color_space
    if cs is ColorSpace.RGB:
        return img
    if cs is ColorSpace.GRAYSCALE:
        return ImageBuffer(np.repeat(img.data[..., None], 3, axis=2), ColorSpace.RGB)
    if cs is ColorSpace.YCBCR:
        return ImageBuffer(_ycbcr_to_rgb(img.data), ColorSpace.RGB)
    return ImageBuffer(_hsv_to_rgb(img.data), ColorSpace.RGB)


def convert_color_space(img: ImageBuffer, target: ColorSpace | str) -> ImageBuffer:
    target = ColorSpace(target)
    src = img.color_space
    if src is target:
        return img
    if src is ColorSpace.GRAYSCALE and target is not ColorSpace.RGB:
        raise ConversionError(f"unsupported conversion {src.value} -> {target.value}")
    rgb = to_rgb(img).data
    if target is ColorSpace.RGB:
        return ImageBuffer(rgb, ColorSpace.RGB)
    if target is ColorSpace.GRAYSCALE:
        return ImageBuffer(_rgb_to_gray(rgb), ColorSpace.GRAYSCALE)
    if target is ColorSpace.YCBCR:
        return ImageBuffer(_rgb_to_ycbcr(rgb), ColorSpace.YCBCR)
    return ImageBuffer(_rgb_to_hsv(rgb), ColorSpace.HSV)


def intensity(img: ImageBuffer) -> np.ndarray:
    """Single-channel luminance-like plane for any color space."""
    cs = img.color_space
    if cs is ColorSpace.GRAYSCALE:
        return img.data
    if cs is ColorSpace.RGB:
        return _rgb_to_gray(img.data)
    if cs is ColorSpace.YCBCR:
        return img.data[..., 0]
    return img.data[..., 2]


# --- ROI extraction ---------------------------------------------------------

def highpass_mask(gray: np.ndarray, sigma: float, threshold: int) -> np.ndarray:
    """|gray - blur(gray)| > threshold, as a 0/255 mask."""
    ksize = int(6 * sigma) | 1
    blurred = cv2.GaussianBlur(gray.astype(np.float32), (ksize, ksize), sigma,
                               borderType=cv2.BORDER_REPLICATE)
    hp = np.abs(gray.astype(np.float32) - blurred)
    return np.where(hp > threshold, 255, 0).astype(np.uint8)


def extract_roi(img: ImageBuffer, cfg: PreprocessConfig) -> tuple[BoundingBox, ImageBuffer]:
    h, w = img.height, img.width
    full = BoundingBox(0, 0, w, h)
    mask = highpass_mask(intensity(img), cfg.roi_blur_sigma, cfg.roi_threshold)
    contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    kept = [c for c in contours if cv2.contourArea(c) >= cfg.roi_min_area]
    if not kept:
        log.debug("no contour above %.0f px; using full frame", cfg.roi_min_area)
        return full, img
    x0, y0, x1, y1 = w, h, 0, 0
    for c in kept:
        bx, by, bw, bh = cv2.boundingRect(c)
        x0, y0 = min(x0, bx), min(y0, by)
        x1, y1 = max(x1, bx + bw), max(y1, by + bh)
    px, py = int(round(cfg.roi_pad_frac * w)), int(round(cfg.roi_pad_frac * h))
    roi = BoundingBox(max(0, x0 - px), max(0, y0 - py), min(w, x1 + px), min(h, y1 + py))
    return roi, img.crop(roi)


def check_roi_covers_ground_truth(roi: BoundingBox, gts: list[BoundingBox]) -> tuple[bool, list[BoundingBox]]:
    violations = [g for g in gts if not roi.contains(g)]
    return not violations, violations


@dataclass
class Preprocessed:
    image: ImageBuffer
    offset: tuple[int, int] = (0, 0)
    roi: BoundingBox | None = None
    steps: list[str] = field(default_factory=list)


def preprocess(img: ImageBuffer, cfg: PreprocessConfig) -> Preprocessed:
    """Run the enabled blocks in order: gamma, ROI, color space."""
    out = Preprocessed(img)
    if cfg.gamma_enabled:
        out.image = gamma_correct(out.image, cfg.gamma)
        out.steps.append("gamma")
    if cfg.roi_enabled:
        roi, crop = extract_roi(out.image, cfg)
        out.image, out.roi, out.offset = crop, roi, (roi.x_min, roi.y_min)
        out.steps.append("roi")
    if out.image.color_space is not cfg.target_color_space:
        out.image = convert_color_space(out.image, cfg.target_color_space)
        out.steps.append(cfg.target_color_space.value)
    return out
