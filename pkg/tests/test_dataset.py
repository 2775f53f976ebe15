import numpy as np
import pytest
from PIL import Image

from vpeval.dataset import (
    DatasetConfig,
    Label,
    load_image,
    load_record_image,
    parse_manifest,
    resolve_image_path,
    validate_dataset,
)
from vpeval.errors import FormatError, ManifestParseError, ValidationError

HEADER = "image_id,x,y,size,size_unit,label"


def cfg(**kw) -> DatasetConfig:
    return DatasetConfig(**kw)


class TestManifest:
    def test_px_and_mm_rows(self):
        text = f"{HEADER}\nJPCLN001,716,1016,3.5,mm,malignant\nJPCNN002,100,200,20,px,benign\n"
        records = parse_manifest(text, cfg())
        assert len(records) == 2
        # 3.5 mm at 0.175 mm/px = 20 px
        assert records[0].diameter_px == pytest.approx(20.0)
        assert records[0].label is Label.MALIGNANT
        assert records[1].diameter_px == 20.0
        assert (records[1].x_px, records[1].y_px) == (100, 200)

    def test_header_must_match_exactly(self):
        with pytest.raises(ManifestParseError) as err:
            parse_manifest("id,x,y,size,unit,label\n", cfg())
        assert err.value.line_no == 1

    def test_empty_file(self):
        with pytest.raises(ManifestParseError):
            parse_manifest("", cfg())

    def test_wrong_column_count_names_line(self):
        text = f"{HEADER}\na,1,2,3,px,benign\nb,1,2,3\n"
        with pytest.raises(ManifestParseError) as err:
            parse_manifest(text, cfg())
        assert err.value.line_no == 3

    @pytest.mark.parametrize("row", [
        "a,1,2,-5,px,benign",          # non-positive size
        "a,1,2,5,cm,benign",           # unknown unit
        "a,1,2,5,px,suspicious",       # unknown label
    ])
    def test_bad_values_raise_validation(self, row):
        with pytest.raises(ValidationError):
            parse_manifest(f"{HEADER}\n{row}\n", cfg())

    def test_bad_numeric_raises_parse_error(self):
        with pytest.raises(ManifestParseError):
            parse_manifest(f"{HEADER}\na,x1,2,5,px,benign\n", cfg())

    def test_blank_lines_skipped(self):
        text = f"{HEADER}\n\na,1,2,5,px,benign\n\n"
        assert len(parse_manifest(text, cfg())) == 1


def _write_raw(path, arr12: np.ndarray):
    path.write_bytes(arr12.astype(">u2").tobytes())


class TestRawLoading:
    def test_12bit_raw_roundtrip(self, tmp_path):
        side = 32
        rng = np.random.default_rng(0)
        samples = rng.integers(0, 4096, (side, side), dtype=np.uint16)
        samples[0, 0] = 4095  # pin the peak so scaling is unambiguous
        path = tmp_path / "a.img"
        _write_raw(path, samples)
        img = load_image(path, cfg(invert_grayscale=False))
        assert img.pixels.shape == (side, side, 1)
        np.testing.assert_allclose(
            img.pixels[:, :, 0], samples.astype(np.float32) / 4095.0, atol=1e-7
        )

    def test_invert_flag_flips_values(self, tmp_path):
        samples = np.array([[0, 4095]], dtype=np.uint16)
        samples = np.repeat(samples, 2, axis=0)  # 2x2 square
        path = tmp_path / "a.img"
        _write_raw(path, samples)
        img = load_image(path, cfg(invert_grayscale=True))
        assert img.pixels[0, 0, 0] == pytest.approx(1.0)
        assert img.pixels[0, 1, 0] == pytest.approx(0.0)

    def test_big_endian_interpretation(self, tmp_path):
        # 0x0FFF big-endian = 4095; little-endian reading would see 0xFF0F.
        path = tmp_path / "a.img"
        path.write_bytes(b"\x0f\xff" * 4)
        img = load_image(path, cfg(invert_grayscale=False))
        assert img.pixels.max() == pytest.approx(1.0)

    def test_odd_byte_count_rejected(self, tmp_path):
        path = tmp_path / "a.img"
        path.write_bytes(b"\x00" * 9)
        with pytest.raises(FormatError) as err:
            load_image(path, cfg())
        assert err.value.field == "file size"

    def test_non_square_rejected(self, tmp_path):
        path = tmp_path / "a.img"
        path.write_bytes(b"\x00" * (2 * 5))  # 5 samples
        with pytest.raises(FormatError):
            load_image(path, cfg())

    def test_sample_above_bit_depth_rejected(self, tmp_path):
        path = tmp_path / "a.img"
        _write_raw(path, np.full((2, 2), 4096, dtype=np.uint16))
        with pytest.raises(FormatError) as err:
            load_image(path, cfg())
        assert err.value.field == "sample"


class TestPngLoading:
    def test_8bit_png(self, tmp_path):
        arr = np.arange(16, dtype=np.uint8).reshape(4, 4) * 17
        path = tmp_path / "a.png"
        Image.fromarray(arr, mode="L").save(path)
        img = load_image(path, cfg(invert_grayscale=False))
        np.testing.assert_allclose(img.pixels[:, :, 0], arr / 255.0, atol=1e-7)

    def test_16bit_png(self, tmp_path):
        arr = np.array([[0, 65535], [1234, 40000]], dtype=np.uint16)
        path = tmp_path / "a.png"
        Image.fromarray(arr).save(path)
        img = load_image(path, cfg(invert_grayscale=False))
        np.testing.assert_allclose(img.pixels[:, :, 0], arr / 65535.0, atol=1e-7)

    def test_rgb_png_rejected(self, tmp_path):
        path = tmp_path / "a.png"
        Image.new("RGB", (4, 4)).save(path)
        with pytest.raises(FormatError):
            load_image(path, cfg())


class TestResolution:
    def test_suffix_probing(self, tmp_path):
        (tmp_path / "JPCLN001.IMG").write_bytes(b"\x00" * 8)
        c = cfg(image_root=tmp_path)
        assert resolve_image_path("JPCLN001", c).name == "JPCLN001.IMG"

    def test_missing_image_raises(self, tmp_path):
        with pytest.raises(ValidationError):
            resolve_image_path("nope", cfg(image_root=tmp_path))

    def test_load_record_image(self, tmp_path):
        _write_raw(tmp_path / "a.img", np.zeros((4, 4), np.uint16))
        c = cfg(image_root=tmp_path)
        rec = parse_manifest(f"{HEADER}\na,1,1,2,px,benign\n", c)[0]
        img = load_record_image(rec, c)
        assert img.pixels.shape == (4, 4, 1)


class TestValidateDataset:
    def test_reports_problems_without_raising(self, tmp_path):
        _write_raw(tmp_path / "good.img", np.zeros((4, 4), np.uint16))
        manifest = tmp_path / "manifest.csv"
        manifest.write_text(
            f"{HEADER}\ngood,1,1,2,px,benign\nmissing,1,1,2,px,malignant\n"
        )
        c = cfg(manifest_path=manifest, image_root=tmp_path)
        records, problems = validate_dataset(c)
        assert len(records) == 2
        assert len(problems) == 1
        assert "missing" in problems[0]
