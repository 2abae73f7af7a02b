"""Reference rasterizer, AE/fuzz image diff and PPM output.

Every pixel is the exact denotation of the program's final layer at the
pixel center; there is no anti-aliasing and no quantization until output.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .color import Color
from .commands import Program, run
from .layers import LayerTerm, denote_many

ROW_BAND = 64


@dataclass(frozen=True)
class RasterImage:
    """Row-major grid of premultiplied colors, stored as (h, w, 4) ARGB."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.pixels.shape != (self.height, self.width, 4):
            raise ValueError(f"pixel array shape {self.pixels.shape} does not match "
                             f"{self.width}x{self.height}")
        self.pixels.setflags(write=False)

    def pixel(self, i: int, j: int) -> Color:
        """Color at column ``i``, row ``j``."""
        return Color(*(float(v) for v in self.pixels[j, i]))

    def composited_rgb(self) -> np.ndarray:
        """RGB after compositing over opaque white, in [0, 1]."""
        a = self.pixels[..., 0:1]
        return self.pixels[..., 1:4] + (1.0 - a)


def rasterize_term(term: LayerTerm, width: int, height: int) -> RasterImage:
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    out = np.empty((height, width, 4))
    xs_row = np.arange(width) + 0.5
    # bands bound memory; each pixel is computed independently of its band
    for j0 in range(0, height, ROW_BAND):
        j1 = min(j0 + ROW_BAND, height)
        ys, xs = np.meshgrid(np.arange(j0, j1) + 0.5, xs_row, indexing="ij")
        chans = denote_many(term, xs, ys)
        for k in range(4):
            out[j0:j1, :, k] = chans[k]
    return RasterImage(width, height, out)


def rasterize(program: Program, width: int, height: int) -> RasterImage:
    return rasterize_term(run(program), width, height)


@dataclass(frozen=True)
class DiffReport:
    differing_pixels: int
    max_channel_delta: float
    total_pixels: int
    worst_pixel: Optional[tuple] = None

    def to_json(self) -> dict:
        return {
            "differing_pixels": self.differing_pixels,
            "max_channel_delta": self.max_channel_delta,
            "total_pixels": self.total_pixels,
            "worst_pixel": list(self.worst_pixel) if self.worst_pixel else None,
        }


class DimensionMismatch(ValueError):
    pass


def image_diff_ae(a: RasterImage, b: RasterImage, fuzz: float = 0.01) -> DiffReport:
    """Count pixels whose composited-over-white RGB differs by more than ``fuzz``."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")
    delta = np.abs(a.composited_rgb() - b.composited_rgb()).max(axis=2)
    differing = int(np.count_nonzero(delta > fuzz))
    worst = None
    max_delta = float(delta.max())
    if max_delta > 0:
        j, i = np.unravel_index(int(np.argmax(delta)), delta.shape)
        worst = (int(i), int(j))
    return DiffReport(differing, max_delta, a.width * a.height, worst)


# ---------------------------------------------------------------------------
# PPM
# ---------------------------------------------------------------------------

def quantize(img: RasterImage) -> np.ndarray:
    """8-bit RGB over white; halves round up."""
    rgb = np.clip(img.composited_rgb(), 0.0, 1.0)
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


def encode_ppm(img: RasterImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + quantize(img).tobytes()


def write_image(img: RasterImage, path: str | os.PathLike) -> None:
    data = encode_ppm(img)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise OSError(f"cannot write image to {os.fspath(path)!r}: {e.strerror}") from e


def decode_ppm(data: bytes) -> RasterImage:
    """Inverse of :func:`encode_ppm` as an opaque image."""
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        fields.append(data[start:pos])
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("only 8-bit binary PPM (P6) is supported")
    w, h = int(fields[1]), int(fields[2])
    body = data[pos + 1:pos + 1 + w * h * 3]
    if len(body) != w * h * 3:
        raise ValueError("truncated PPM payload")
    rgb = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3) / 255.0
    pixels = np.concatenate([np.ones((h, w, 1)), rgb], axis=2)
    return RasterImage(w, h, pixels)


def read_image(path: str | os.PathLike) -> RasterImage:
    with open(path, "rb") as f:
        return decode_ppm(f.read())
