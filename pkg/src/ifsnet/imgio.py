"""Grayscale image and CSV I/O.

Reads 8/16-bit grayscale images (binary PGM "P5" and PNG); writes unit
planes as 16-bit PNG with value = round(plane * 65535); writes histograms
as CSV with header bin_lo,bin_hi,count.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidImageError
from .ifs import Histogram


def _read_pgm(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # Header: "P5" <ws> width <ws> height <ws> maxval <single ws> raster.
    # '#' starts a comment running to end of line.
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1].isspace():
                pos += 1
            elif data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        return data[start:pos]

    if token() != b"P5":
        raise InvalidImageError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise InvalidImageError(f"{path}: malformed PGM header") from exc
    pos += 1  # exactly one whitespace byte before the raster
    if not 0 < maxval < 65536:
        raise InvalidImageError(f"{path}: PGM maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if len(data) - pos < width * height * dtype.itemsize:
        raise InvalidImageError(f"{path}: truncated PGM raster")
    raster = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return raster.reshape(height, width).astype(np.float64)


def read_gray(path) -> np.ndarray:
    """Read a grayscale image (PGM or PNG, 8 or 16 bit) as a float64 array."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        return _read_pgm(path)
    with Image.open(path) as im:
        if im.mode not in ("L", "I", "I;16", "I;16B", "I;16L"):
            im = im.convert("L")
        arr = np.asarray(im)
    if arr.ndim != 2:
        raise InvalidImageError(f"{path}: expected grayscale, got shape {arr.shape}")
    return arr.astype(np.float64)


def write_plane_png(path, plane: np.ndarray) -> None:
    """Write a unit-interval plane as a 16-bit grayscale PNG."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.min() < 0.0 or plane.max() > 1.0:
        raise InvalidImageError("plane values must lie in [0, 1]")
    quantized = np.round(plane * 65535.0).astype(np.uint16)
    Image.fromarray(quantized).save(Path(path), format="PNG")


def read_plane_png(path) -> np.ndarray:
    """Read back a 16-bit plane PNG as floats in [0, 1]."""
    return read_gray(path) / 65535.0


def write_label_png(path, label: np.ndarray) -> None:
    """Write a per-pixel class-id mask as an 8-bit PNG (pixel value = class id)."""
    label = np.asarray(label)
    if label.min() < 0 or label.max() > 255:
        raise InvalidImageError("label ids must fit in 8 bits")
    Image.fromarray(label.astype(np.uint8)).save(Path(path), format="PNG")


def write_intensity_png(path, img: np.ndarray) -> None:
    """Write an intensity image as 16-bit PNG, rounding and clipping to [0, 65535]."""
    arr = np.clip(np.round(np.asarray(img, dtype=np.float64)), 0, 65535).astype(np.uint16)
    Image.fromarray(arr).save(Path(path), format="PNG")


def write_histogram_csv(path, hist: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])


def read_histogram_csv(path) -> Histogram:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    edges = [float(r["bin_lo"]) for r in rows] + [float(rows[-1]["bin_hi"])]
    counts = [int(r["count"]) for r in rows]
    return Histogram(edges=np.asarray(edges), counts=np.asarray(counts))
