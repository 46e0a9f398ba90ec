import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spydet.core import BoundingBox
from spydet.preprocess import (
    ColorSpace, ConfigurationError, ConversionError, ImageBuffer, PreprocessConfig,
    check_roi_covers_ground_truth, convert_color_space, extract_roi, gamma_correct, gamma_table,
    intensity, preprocess, read_image, to_rgb, write_image,
)

rgb_images = arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3)))


def rgb(pixels):
    return ImageBuffer(np.array(pixels, dtype=np.uint8).reshape(1, -1, 3), ColorSpace.RGB)


class TestGamma:
    def test_fixed_points(self):
        for g in (0.3, 0.8, 1.0, 2.2):
            t = gamma_table(g)
            assert t[0] == 0 and t[255] == 255

    def test_mid_gray_example(self):
        # 255 * (128/255)**0.8 = 146.92..., so the transfer table maps 128 to 147
        exact = 255 * math.exp(0.8 * math.log(128 / 255))
        assert 146.9 < exact < 147.0
        img = ImageBuffer(np.full((2, 2, 3), 128, np.uint8))
        assert (gamma_correct(img, 0.8).data == 147).all()

    def test_identity_and_errors(self):
        assert np.array_equal(gamma_table(1.0), np.arange(256))
        with pytest.raises(ConfigurationError):
            gamma_table(0)
        with pytest.raises(ConfigurationError):
            PreprocessConfig(gamma=-1)

    @given(st.floats(0.05, 5.0))
    def test_monotone(self, g):
        t = gamma_table(g).astype(int)
        assert (np.diff(t) >= 0).all()

    @given(st.floats(0.05, 0.99))
    def test_below_one_brightens(self, g):
        assert (gamma_table(g).astype(int) >= np.arange(256)).all()


class TestColorSpaces:
    def test_primary_red_hsv(self):
        assert convert_color_space(rgb([255, 0, 0]), "hsv").data[0, 0].tolist() == [0, 255, 255]

    def test_gray_hsv_and_luma(self):
        hsv = convert_color_space(rgb([128, 128, 128]), ColorSpace.HSV).data[0, 0]
        assert hsv[1] == 0 and hsv[2] == 128
        assert convert_color_space(rgb([255, 255, 255]), "grayscale").data[0, 0] == 255

    @given(rgb_images)
    def test_hsv_matches_colorsys(self, data):
        hsv = convert_color_space(ImageBuffer(data), ColorSpace.HSV).data
        for (r, g, b), (h, s, v) in zip(data.reshape(-1, 3), hsv.reshape(-1, 3)):
            eh, es, ev = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
            assert v == max(r, g, b)
            assert abs(int(s) - es * 255) <= 0.5 + 1e-9
            dh = abs(int(h) - (eh * 255) % 256)
            assert min(dh, 256 - dh) <= 1

    @given(st.integers(0, 255))
    def test_achromatic_has_zero_saturation(self, v):
        assert convert_color_space(rgb([v, v, v]), "hsv").data[0, 0, 1] == 0

    @given(rgb_images)
    def test_luma_formula(self, data):
        gray = convert_color_space(ImageBuffer(data), "grayscale").data
        f = data.astype(float)
        expected = np.floor(0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2] + 0.5)
        assert np.array_equal(gray, expected.astype(np.uint8))

    @given(rgb_images)
    def test_grayscale_idempotent(self, data):
        g1 = convert_color_space(ImageBuffer(data), "grayscale")
        g2 = convert_color_space(to_rgb(g1), "grayscale")
        assert np.array_equal(g1.data, g2.data)
        assert convert_color_space(g1, "grayscale") is g1

    @given(rgb_images)
    def test_ycbcr_round_trip_is_close(self, data):
        back = to_rgb(convert_color_space(ImageBuffer(data), "ycbcr")).data.astype(int)
        assert np.abs(back - data.astype(int)).max() <= 3

    @given(rgb_images)
    def test_hsv_round_trip_is_close(self, data):
        back = to_rgb(convert_color_space(ImageBuffer(data), "hsv")).data.astype(int)
        assert np.abs(back - data.astype(int)).max() <= 6

    def test_ycbcr_reference_values(self):
        y, cb, cr = convert_color_space(rgb([255, 0, 0]), "ycbcr").data[0, 0]
        assert (y, cb, cr) == (76, 85, 255)

    def test_grayscale_source_cannot_become_hsv(self):
        g = ImageBuffer(np.zeros((2, 2), np.uint8), ColorSpace.GRAYSCALE)
        with pytest.raises(ConversionError, match="grayscale -> hsv"):
            convert_color_space(g, "hsv")

    def test_intensity_per_space(self):
        img = rgb([10, 200, 30])
        assert intensity(convert_color_space(img, "hsv"))[0, 0] == 200
        assert intensity(convert_color_space(img, "ycbcr"))[0, 0] == intensity(img)[0, 0]

    def test_buffer_validation(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((2, 2), np.uint8), ColorSpace.RGB)
        with pytest.raises(TypeError):
            ImageBuffer(np.zeros((2, 2, 3), np.float32))


def square_frame(size=640, box=(270, 270, 370, 370), value=255):
    data = np.zeros((size, size, 3), np.uint8)
    x0, y0, x1, y1 = box
    data[y0:y1, x0:x1] = value
    return ImageBuffer(data)


class TestROI:
    cfg = PreprocessConfig(roi_enabled=True)

    def test_black_frame_falls_back_to_full_frame(self):
        roi, crop = extract_roi(ImageBuffer(np.zeros((64, 80, 3), np.uint8)), self.cfg)
        assert roi == BoundingBox(0, 0, 80, 64)
        assert crop.data.shape == (64, 80, 3)

    def test_contains_centered_square(self):
        roi, crop = extract_roi(square_frame(), self.cfg)
        assert roi.contains(BoundingBox(270, 270, 370, 370))
        assert roi != BoundingBox(0, 0, 640, 640)
        assert crop.data.shape[:2] == (roi.height, roi.width)

    def test_ignores_small_speck(self):
        img = square_frame()
        img.data[20:23, 20:23] = 255
        roi, _ = extract_roi(img, self.cfg)
        assert roi.contains(BoundingBox(270, 270, 370, 370))
        assert roi.x_min > 23 and roi.y_min > 23

    def test_union_of_parts(self):
        img = square_frame()
        img.data[40:100, 500:600] = 200
        roi, _ = extract_roi(img, self.cfg)
        ok, bad = check_roi_covers_ground_truth(roi, [BoundingBox(270, 270, 370, 370), BoundingBox(500, 40, 600, 100)])
        assert ok and bad == []

    def test_coverage_check_examples(self):
        full = BoundingBox(0, 0, 640, 640)
        assert check_roi_covers_ground_truth(full, [BoundingBox(1, 1, 639, 639)]) == (True, [])
        assert check_roi_covers_ground_truth(BoundingBox(0, 0, 5, 5), []) == (True, [])
        ok, bad = check_roi_covers_ground_truth(BoundingBox(0, 0, 100, 100), [BoundingBox(50, 50, 150, 150)])
        assert not ok and bad == [BoundingBox(50, 50, 150, 150)]

    @given(st.lists(st.tuples(st.integers(0, 180), st.integers(0, 180), st.integers(20, 60),
                              st.integers(20, 60), st.integers(60, 255)), min_size=1, max_size=4))
    def test_bright_shapes_on_black_are_never_clipped(self, shapes):
        data = np.zeros((240, 240, 3), np.uint8)
        gts = []
        for x, y, w, h, v in shapes:
            data[y:y + h, x:x + w] = v
            gts.append(BoundingBox(x, y, x + w, y + h))
        roi, _ = extract_roi(ImageBuffer(data), self.cfg)
        assert roi.area > 0 and BoundingBox(0, 0, 240, 240).contains(roi)
        assert check_roi_covers_ground_truth(roi, gts)[0]


class TestPreprocess:
    def test_disabled_blocks_are_passthrough(self):
        img = square_frame(64, (10, 10, 20, 20))
        out = preprocess(img, PreprocessConfig())
        assert out.image is img and out.offset == (0, 0) and out.steps == []

    def test_order_and_offset(self):
        cfg = PreprocessConfig(gamma_enabled=True, roi_enabled=True, target_color_space=ColorSpace.GRAYSCALE)
        out = preprocess(square_frame(), cfg)
        assert out.steps == ["gamma", "roi", "grayscale"]
        assert out.offset == (out.roi.x_min, out.roi.y_min)
        assert out.image.color_space is ColorSpace.GRAYSCALE


def test_png_round_trip(tmp_path):
    data = np.random.default_rng(0).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    write_image(tmp_path / "a.png", ImageBuffer(data))
    assert np.array_equal(read_image(tmp_path / "a.png").data, data)
    with pytest.raises(OSError):
        read_image(tmp_path / "missing.png")
