import json
import subprocess
import sys
from pathlib import Path

import pytest

from spydet.annotations import load_detections, load_labels, write_detections, write_labels
from spydet.cli import main
from spydet.core import BoundingBox, ComponentClass as C, Detection
from spydet.preprocess import read_image
from satellite import write_set


def tree(d: Path) -> dict[str, bytes]:
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def satellite(tmp_path_factory):
    root = tmp_path_factory.mktemp("sat")
    write_set(root / "calib", 20, seed=11, with_body=True)
    write_set(root / "test", 8, seed=12)
    lut = root / "lut.json"
    assert main(["calibrate-texture", "--images", str(root / "calib/images"),
                 "--labels", str(root / "calib/labels"), "--out", str(lut)]) == 0
    return root, lut


class TestShapegen:
    def test_writes_and_is_deterministic(self, tmp_path):
        argv = ["shapegen", "--count", "10", "--seed", "7", "--frame-size", "256"]
        assert main(argv + ["--out", str(tmp_path / "a")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        a = tree(tmp_path / "a")
        assert len([k for k in a if k.startswith("images/")]) == 10
        assert len([k for k in a if k.startswith("labels/")]) == 10
        assert a == tree(tmp_path / "b")

    def test_zero_count(self, tmp_path, capsys):
        assert main(["shapegen", "--count", "0", "--out", str(tmp_path / "z")]) == 0
        assert not (tmp_path / "z").exists() or not any((tmp_path / "z").iterdir())
        assert "wrote 0 frames" in capsys.readouterr().out

    def test_unwritable_target_fails(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["shapegen", "--count", "1", "--out", str(blocker)]) == 1


class TestRun:
    def test_detects_satellite_components(self, satellite, tmp_path):
        root, lut = satellite
        out, shapes, overlay = tmp_path / "dets", tmp_path / "shapes", tmp_path / "ov"
        code = main(["run", "--images", str(root / "test/images"), "--lut", str(lut), "--out", str(out),
                     "--shapes-out", str(shapes), "--overlay", str(overlay), "--jobs", "2"])
        assert code == 0
        stems = sorted(p.stem for p in (root / "test/images").glob("*.png"))
        assert sorted(p.stem for p in out.glob("*.txt")) == stems
        assert sorted(p.stem for p in shapes.glob("*.txt")) == stems
        assert sorted(p.stem for p in overlay.glob("*.png")) == stems
        labels = {d.label for s in stems for d in load_detections(out / f"{s}.txt", 400, 400)}
        assert {C.SOLAR, C.ANTENNA, C.THRUSTER, C.UNKNOWN} <= labels
        assert C.WHITE_RADIATOR not in labels

    def test_serial_matches_parallel(self, satellite, tmp_path):
        root, lut = satellite
        for jobs in ("1", "3"):
            assert main(["run", "--images", str(root / "test/images"), "--lut", str(lut),
                         "--out", str(tmp_path / jobs), "--jobs", jobs]) == 0
        assert tree(tmp_path / "1") == tree(tmp_path / "3")

    def test_lut_via_config(self, satellite, tmp_path):
        root, lut = satellite
        cfg = tmp_path / "c.yaml"
        cfg.write_text(f"texture: {{lut: {lut}}}\n")
        assert main(["run", "--config", str(cfg), "--images", str(root / "test/images"),
                     "--out", str(tmp_path / "o")]) == 0

    def test_missing_lut_is_config_error(self, satellite, tmp_path):
        root, _ = satellite
        assert main(["run", "--images", str(root / "test/images"), "--out", str(tmp_path / "o")]) == 2
        assert main(["run", "--images", str(root / "test/images"), "--out", str(tmp_path / "o"),
                     "--lut", str(tmp_path / "absent.json")]) == 2

    def test_missing_and_empty_image_dirs(self, satellite, tmp_path):
        _, lut = satellite
        assert main(["run", "--images", str(tmp_path / "nope"), "--lut", str(lut), "--out", str(tmp_path / "o")]) == 2
        (tmp_path / "empty").mkdir()
        assert main(["run", "--images", str(tmp_path / "empty"), "--lut", str(lut), "--out", str(tmp_path / "o")]) == 0

    def test_corrupt_image_reports_failure(self, satellite, tmp_path):
        root, lut = satellite
        imgs = tmp_path / "imgs"
        imgs.mkdir()
        (imgs / "good.png").write_bytes((root / "test/images/sat000.png").read_bytes())
        (imgs / "bad.png").write_bytes(b"not a png")
        assert main(["run", "--images", str(imgs), "--lut", str(lut), "--out", str(tmp_path / "o")]) == 1
        assert (tmp_path / "o" / "good.txt").is_file()

    def test_bad_config_key(self, satellite, tmp_path):
        root, lut = satellite
        cfg = tmp_path / "c.yaml"
        cfg.write_text("roi: {foo: 1}\n")
        assert main(["run", "--config", str(cfg), "--images", str(root / "test/images"),
                     "--lut", str(lut), "--out", str(tmp_path / "o")]) == 2


class TestCalibrate:
    def test_lut_contents(self, satellite):
        _, lut = satellite
        data = json.loads(lut.read_text())
        assert "variance" in json.dumps(data) and "entropy" in json.dumps(data)

    def test_fixed_bins(self, satellite, tmp_path):
        root, _ = satellite
        out = tmp_path / "lut.json"
        assert main(["calibrate-texture", "--images", str(root / "calib/images"), "--labels",
                     str(root / "calib/labels"), "--out", str(out), "--binning", "width",
                     "--variance-bins", "12", "--entropy-bins", "9"]) == 0
        assert out.is_file()


def _write(dir_: Path, stem: str, dets, w=200, h=200, labels=False):
    dir_.mkdir(parents=True, exist_ok=True)
    (write_labels if labels else write_detections)(dir_ / f"{stem}.txt", dets, w, h)


class TestFuse:
    def test_worked_example(self, tmp_path):
        _write(tmp_path / "y", "f", [Detection(BoundingBox(100, 100, 150, 150), C.SOLAR, 0.6)])
        _write(tmp_path / "s", "f", [Detection(BoundingBox(110, 100, 150, 150), C.SOLAR, 0.4)])
        assert main(["fuse", "--yolo", str(tmp_path / "y"), "--spy", str(tmp_path / "s"),
                     "--out", str(tmp_path / "o"), "--size", "200x200"]) == 0
        (d,) = load_detections(tmp_path / "o" / "f.txt", 200, 200)
        assert (d.box.x_min, d.box.y_min, d.box.width, d.box.height) == (104, 100, 46, 50)
        assert d.label is C.SOLAR and d.confidence == pytest.approx(0.5)

    def test_one_side_empty(self, tmp_path):
        yolo = [Detection(BoundingBox(10, 10, 40, 40), C.BODY, 0.8)]
        _write(tmp_path / "y", "f", yolo)
        _write(tmp_path / "s", "f", [])
        assert main(["fuse", "--yolo", str(tmp_path / "y"), "--spy", str(tmp_path / "s"),
                     "--out", str(tmp_path / "o"), "--size", "200x200"]) == 0
        assert [d.box for d in load_detections(tmp_path / "o" / "f.txt", 200, 200)] == [yolo[0].box]

    def test_stem_mismatch(self, tmp_path, caplog):
        _write(tmp_path / "y", "a", [])
        _write(tmp_path / "s", "b", [])
        assert main(["fuse", "--yolo", str(tmp_path / "y"), "--spy", str(tmp_path / "s"),
                     "--out", str(tmp_path / "o")]) == 2
        assert "'a'" in caplog.text and "'b'" in caplog.text

    def test_sizes_from_images(self, satellite, tmp_path):
        root, _ = satellite
        gts = load_labels(root / "test/labels/sat000.txt", 400, 400)
        _write(tmp_path / "y", "sat000", gts, 400, 400)
        _write(tmp_path / "s", "sat000", [], 400, 400)
        assert main(["fuse", "--yolo", str(tmp_path / "y"), "--spy", str(tmp_path / "s"),
                     "--out", str(tmp_path / "o"), "--images", str(root / "test/images")]) == 0
        out = load_detections(tmp_path / "o" / "sat000.txt", 400, 400)
        assert [d.box for d in out] == [g.box for g in gts]


class TestEval:
    def _labels(self, tmp_path):
        gts = [Detection(BoundingBox(10, 10, 60, 60), C.ANTENNA, 1.0),
               Detection(BoundingBox(100, 100, 180, 150), C.SOLAR, 1.0)]
        _write(tmp_path / "labels", "f", gts, labels=True)
        return gts

    def _eval(self, tmp_path, dets, *extra):
        _write(tmp_path / "dets", "f", dets)
        out = tmp_path / "report.json"
        code = main(["eval", "--detections", str(tmp_path / "dets"), "--labels", str(tmp_path / "labels"),
                     "--size", "200x200", "--out", str(out), *extra])
        return code, json.loads(out.read_text()) if out.exists() else None

    def test_perfect(self, tmp_path):
        gts = self._labels(tmp_path)
        code, rep = self._eval(tmp_path, [Detection(g.box, g.label, 0.9) for g in gts])
        assert code == 0 and rep["overall"]["map50"] == 1.0 and rep["overall"]["recall"] == 1.0

    def test_empty_detections(self, tmp_path):
        self._labels(tmp_path)
        code, rep = self._eval(tmp_path, [])
        assert code == 0 and rep["overall"]["recall"] == 0.0 and rep["misclassifications"]["all"] == 0

    def test_cross_class(self, tmp_path):
        gts = self._labels(tmp_path)
        code, rep = self._eval(tmp_path, [Detection(gts[0].box, C.SOLAR, 0.9)])
        assert rep["misclassifications"]["all"] == 1

    def test_missing_detection_file(self, tmp_path):
        self._labels(tmp_path)
        (tmp_path / "dets").mkdir()
        assert main(["eval", "--detections", str(tmp_path / "dets"), "--labels", str(tmp_path / "labels")]) == 2

    def test_shape_overlap(self, tmp_path):
        gts = self._labels(tmp_path)
        _write(tmp_path / "shapes", "f", [Detection(gts[0].box, C.ANTENNA, 0.5)])
        code, rep = self._eval(tmp_path, [], "--shape-detections", str(tmp_path / "shapes"))
        assert code == 0
        area = [g.box.area for g in gts]
        assert rep["sd_overlap"]["mean"] == pytest.approx(area[0] / sum(area))
        assert rep["sd_overlap"]["inside"] == 1

    def test_malformed_label_file(self, tmp_path):
        (tmp_path / "labels").mkdir()
        (tmp_path / "labels" / "f.txt").write_text("0 0.5 0.5\n")
        _write(tmp_path / "dets", "f", [])
        assert main(["eval", "--detections", str(tmp_path / "dets"), "--labels", str(tmp_path / "labels")]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spydet.cli", "shapegen", "--count", "2",
                           "--frame-size", "128", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "wrote 2 frames" in proc.stdout
    assert read_image(tmp_path / "images" / "000000.png").width == 128


def test_usage_error_exits_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code != 0
