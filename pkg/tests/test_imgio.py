"""Image and CSV I/O suite."""

import numpy as np
import pytest

from ifsnet import imgio
from ifsnet.errors import InvalidImageError
from ifsnet.ifs import plane_histogram


def write_pgm(path, arr, maxval):
    header = f"P5\n# synthetic test image\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n"
    dtype = ">u2" if maxval > 255 else "u1"
    path.write_bytes(header.encode() + arr.astype(dtype).tobytes())


class TestPgm:
    def test_8bit_round_trip(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(5, 7))
        write_pgm(tmp_path / "img.pgm", arr, 255)
        out = imgio.read_gray(tmp_path / "img.pgm")
        np.testing.assert_array_equal(out, arr)

    def test_16bit_big_endian(self, tmp_path, rng):
        arr = rng.integers(0, 65536, size=(4, 3))
        write_pgm(tmp_path / "img.pgm", arr, 65535)
        out = imgio.read_gray(tmp_path / "img.pgm")
        np.testing.assert_array_equal(out, arr)

    def test_rejects_non_p5(self, tmp_path):
        (tmp_path / "img.pgm").write_bytes(b"P2\n2 2\n255\n0 1 2 3")
        with pytest.raises(InvalidImageError):
            imgio.read_gray(tmp_path / "img.pgm")

    def test_rejects_truncated(self, tmp_path):
        (tmp_path / "img.pgm").write_bytes(b"P5\n4 4\n255\nabc")
        with pytest.raises(InvalidImageError):
            imgio.read_gray(tmp_path / "img.pgm")


class TestPng:
    def test_plane_quantization_round_trip(self, tmp_path, rng):
        plane = rng.random((9, 6))
        imgio.write_plane_png(tmp_path / "p.png", plane)
        back = imgio.read_plane_png(tmp_path / "p.png")
        assert np.abs(back - plane).max() <= 0.5 / 65535

    def test_plane_rejects_out_of_range(self, tmp_path):
        with pytest.raises(InvalidImageError):
            imgio.write_plane_png(tmp_path / "p.png", np.array([[1.2]]))

    def test_intensity_round_trip_integers(self, tmp_path):
        img = np.array([[0.0, 10.0], [200.0, 65535.0]])
        imgio.write_intensity_png(tmp_path / "i.png", img)
        np.testing.assert_array_equal(imgio.read_gray(tmp_path / "i.png"), img)

    def test_intensity_clips_negative(self, tmp_path):
        imgio.write_intensity_png(tmp_path / "i.png", np.array([[-5.0, 3.0]]))
        np.testing.assert_array_equal(imgio.read_gray(tmp_path / "i.png"), [[0.0, 3.0]])

    def test_label_round_trip(self, tmp_path, rng):
        label = rng.integers(0, 4, size=(8, 8))
        imgio.write_label_png(tmp_path / "l.png", label)
        np.testing.assert_array_equal(imgio.read_gray(tmp_path / "l.png"), label)


class TestHistogramCsv:
    def test_round_trip(self, tmp_path, rng):
        hist = plane_histogram(rng.random((16, 16)), bins=32)
        imgio.write_histogram_csv(tmp_path / "h.csv", hist)
        back = imgio.read_histogram_csv(tmp_path / "h.csv")
        np.testing.assert_array_equal(back.counts, hist.counts)
        np.testing.assert_array_equal(back.edges, hist.edges)

    def test_header(self, tmp_path):
        imgio.write_histogram_csv(tmp_path / "h.csv", plane_histogram(np.array([0.5]), 2))
        first = (tmp_path / "h.csv").read_text().splitlines()[0]
        assert first == "bin_lo,bin_hi,count"
