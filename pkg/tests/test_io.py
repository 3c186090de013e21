import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from conftest import write_pgm_ascii
from oracles import gaussian_sum_bruteforce
from mdis.exceptions import DecodeError, FixationParseError, InvalidInputError, OutOfRangeError
from mdis.io import (
    FixationSet,
    GrayImage,
    density_map,
    load_fixations,
    load_image,
    pad_to_dyadic,
    read_pfm,
    write_pfm,
    write_pgm,
)


class TestLoadImage:
    def test_white_pgm(self, tmp_path):
        img = load_image(write_pgm_ascii(tmp_path / "w.pgm", [[255, 255], [255, 255]]))
        assert img.side == 2
        assert img.crop == (2, 2)
        np.testing.assert_array_equal(img.data, np.ones((2, 2)))

    def test_linear_scaling(self, tmp_path):
        img = load_image(write_pgm_ascii(tmp_path / "c.pgm", [[0, 255], [255, 0]]))
        np.testing.assert_array_equal(img.data, [[0.0, 1.0], [1.0, 0.0]])

    def test_binary_pgm_roundtrip(self, tmp_path):
        vals = np.array([[0, 51], [102, 255]]) / 255.0
        write_pgm(tmp_path / "b.pgm", vals)
        np.testing.assert_allclose(load_image(tmp_path / "b.pgm").data, vals)

    def test_16bit_pgm(self, tmp_path):
        raw = np.array([[0, 65535], [32768, 1]], dtype=">u2")
        (tmp_path / "d.pgm").write_bytes(b"P5\n2 2\n65535\n" + raw.tobytes())
        np.testing.assert_allclose(load_image(tmp_path / "d.pgm").data, raw.astype(float) / 65535)

    def test_png_pads_to_next_power(self, tmp_path):
        Image.fromarray(np.zeros((150, 100), dtype=np.uint8)).save(tmp_path / "r.png")
        img = load_image(tmp_path / "r.png")
        assert img.side == 256
        assert img.crop == (100, 150)

    def test_rgb_uses_rec601(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[0, 0] = (255, 0, 0)
        rgb[0, 1] = (0, 255, 0)
        rgb[1, 0] = (0, 0, 255)
        rgb[1, 1] = (255, 255, 255)
        Image.fromarray(rgb).save(tmp_path / "rgb.png")
        np.testing.assert_allclose(load_image(tmp_path / "rgb.png").data, [[0.299, 0.587], [0.114, 1.0]])

    def test_16bit_png(self, tmp_path):
        arr = np.array([[0, 65535], [1000, 40000]], dtype=np.uint16)
        Image.fromarray(arr).save(tmp_path / "s.png")
        np.testing.assert_allclose(load_image(tmp_path / "s.png").data, arr / 65535.0)

    def test_garbage_is_decode_error(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"not an image at all")
        with pytest.raises(DecodeError):
            load_image(tmp_path / "bad.png")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DecodeError):
            load_image(tmp_path / "nope.png")

    def test_zero_dimension(self, tmp_path):
        (tmp_path / "z.pgm").write_bytes(b"P5\n0 3\n255\n")
        with pytest.raises(InvalidInputError):
            load_image(tmp_path / "z.pgm")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 20), st.sampled_from([np.uint8, np.uint16]), st.integers(0, 2**31))
    def test_values_in_unit_interval(self, h, w, dtype, seed):
        import tempfile
        from pathlib import Path

        rng = np.random.default_rng(seed)
        arr = rng.integers(0, np.iinfo(dtype).max, size=(h, w), endpoint=True).astype(dtype)
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "x.png"
            Image.fromarray(arr).save(p)
            data = load_image(p).data
        assert data.min() >= 0.0 and data.max() <= 1.0


class TestPad:
    def test_already_dyadic(self, rng):
        x = rng.random((64, 64))
        img = pad_to_dyadic(x)
        np.testing.assert_array_equal(img.data, x)
        assert img.crop == (64, 64)

    def test_next_power(self, rng):
        img = pad_to_dyadic(rng.random((64, 65)))
        assert img.side == 128
        assert img.crop == (65, 64)

    def test_row_reflection_by_hand(self):
        # width 3, height 1: each edge mirrors about the pixel boundary, and the
        # single row is mirrored downwards again and again
        a, b, c = 0.1, 0.5, 0.9
        img = pad_to_dyadic([[a, b, c]])
        expected = np.array([[a, b, c, c]] * 4)
        np.testing.assert_array_equal(img.data, expected)

    def test_repeated_reflection(self):
        img = pad_to_dyadic([[1.0, 2.0, 3.0, 4.0, 5.0]])
        # 5 -> 8 columns, mirror axis after the last pixel
        np.testing.assert_array_equal(img.data[0], [1, 2, 3, 4, 5, 5, 4, 3])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**31))
    def test_crop_is_identity(self, h, w, seed):
        x = np.random.default_rng(seed).random((h, w))
        img = pad_to_dyadic(x)
        np.testing.assert_array_equal(img.cropped(), x)

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            pad_to_dyadic(np.zeros((0, 3)))

    def test_grayimage_invariants(self):
        with pytest.raises(InvalidInputError):
            GrayImage(np.zeros((3, 3)), (3, 3))
        with pytest.raises(InvalidInputError):
            GrayImage(np.zeros((4, 4)), (5, 4))


class TestFixations:
    def test_two_points(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("10,20\n30,40")
        fx = load_fixations(p, (64, 64))
        assert len(fx) == 2
        np.testing.assert_array_equal(fx.points, [[10, 20], [30, 40]])

    def test_header(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("x,y\n0,0\n")
        fx = load_fixations(p, (64, 64))
        np.testing.assert_array_equal(fx.points, [[0, 0]])

    def test_out_of_range(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("70,10\n")
        with pytest.raises(OutOfRangeError):
            load_fixations(p, (64, 64))

    def test_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("1,2\n3,four\n")
        with pytest.raises(FixationParseError) as info:
            load_fixations(p, (64, 64))
        assert info.value.line_no == 2

    def test_duplicates_kept(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("5,5\n5,5\n")
        assert len(load_fixations(p, (8, 8))) == 2


class TestDensity:
    def test_single_peak(self):
        d = density_map(FixationSet([[32, 32]], (65, 65)), sigma=3.0)
        assert d.data.max() == 1.0
        assert np.unravel_index(np.argmax(d.data), d.data.shape) == (32, 32)
        assert np.sum(d.data == 1.0) == 1

    def test_duplicate_fixation_same_map(self):
        one = density_map(FixationSet([[10, 12]], (40, 30)), 2.5)
        two = density_map(FixationSet([[10, 12], [10, 12]], (40, 30)), 2.5)
        np.testing.assert_allclose(one.data, two.data, rtol=1e-14)

    def test_two_far_peaks_match_bruteforce(self):
        sigma = 2.0
        pts = [(5, 10), (25, 10)]  # 10 sigma apart
        d = density_map(FixationSet(pts, (31, 21)), sigma)
        ref = gaussian_sum_bruteforce(pts, (31, 21), sigma)
        np.testing.assert_allclose(d.data, ref, rtol=1e-12, atol=1e-15)
        for x, y in pts:
            patch = d.data[y - 1: y + 2, x - 1: x + 2]
            assert d.data[y, x] == patch.max()
            assert d.data[y, x] == pytest.approx(1.0, abs=1e-12)

    def test_permutation_invariant(self, rng):
        pts = rng.integers(0, 30, size=(12, 2))
        a = density_map(FixationSet(pts, (30, 30)), 3.0)
        b = density_map(FixationSet(pts[rng.permutation(12)], (30, 30)), 3.0)
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            density_map(FixationSet(np.zeros((0, 2)), (4, 4)), 1.0)

    def test_default_sigma(self):
        d = density_map(FixationSet([[0, 0]], (30, 40)))
        # 2% of the 50-pixel diagonal = 1 pixel
        assert d.data[0, 1] == pytest.approx(np.exp(-0.5))


def test_pfm_roundtrip(tmp_path, rng):
    x = rng.random((5, 7)).astype(np.float32).astype(np.float64)
    write_pfm(tmp_path / "m.pfm", x)
    np.testing.assert_array_equal(read_pfm(tmp_path / "m.pfm"), x)
