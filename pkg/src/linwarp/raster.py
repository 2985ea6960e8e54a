"""Raster images: in-memory representation, file I/O, coordinates, bilinear lookup.

Coordinate convention: normalized coordinates (u, v) with [-1, 1] spanning the
image extent in both axes, and pixel centers at (2i + 1)/N - 1 (half-pixel
convention). Continuous pixel space x satisfies u = (2x + 1)/W - 1.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import gaussian_filter1d


class ImageFormatError(ValueError):
    """Unreadable, corrupt, or unsupported image file."""


class NormCoord(NamedTuple):
    """Normalized image coordinate; (-1,-1)..(1,1) covers the image extent."""

    u: float
    v: float


@dataclass(frozen=True)
class Image:
    """H x W x C raster of float64 intensities, nominally in [0, 1].

    ``data`` is row-major, channel-interleaved, copied on construction, and
    read-only afterwards. File loaders clamp into [0, 1]; computed images
    (e.g. sampler outputs with a fitted bias) may exceed the nominal range
    slightly and are clamped again on save.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be HxW or HxWxC, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensities must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


# ---------------------------------------------------------------------------
# Coordinates

def pixel_center(row: int, col: int, height: int, width: int) -> NormCoord:
    """Normalized coordinate of the center of pixel (row, col)."""
    return NormCoord((2.0 * col + 1.0) / width - 1.0, (2.0 * row + 1.0) / height - 1.0)


def pixel_center_grid(height: int, width: int) -> np.ndarray:
    """(height, width, 2) array of pixel-center (u, v) coordinates."""
    u = (2.0 * np.arange(width) + 1.0) / width - 1.0
    v = (2.0 * np.arange(height) + 1.0) / height - 1.0
    out = np.empty((height, width, 2))
    out[:, :, 0] = u[None, :]
    out[:, :, 1] = v[:, None]
    return out


def _to_pixel_space(coords: np.ndarray, height: int, width: int):
    """Map normalized (u, v) to continuous pixel (x, y); inverse of pixel_center."""
    x = (coords[..., 0] + 1.0) * (width / 2.0) - 0.5
    y = (coords[..., 1] + 1.0) * (height / 2.0) - 0.5
    return x, y


# ---------------------------------------------------------------------------
# Bilinear lookup

def _gather_corners(data: np.ndarray, x: np.ndarray, y: np.ndarray):
    h, w = data.shape[0], data.shape[1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    # clamp each corner from the unclamped floor: queries in the half-pixel
    # border band must see the edge value, not a reweighted interior mix
    xi = x0.astype(np.int64)
    yi = y0.astype(np.int64)
    xi0 = np.clip(xi, 0, w - 1)
    xi1 = np.clip(xi + 1, 0, w - 1)
    yi0 = np.clip(yi, 0, h - 1)
    yi1 = np.clip(yi + 1, 0, h - 1)
    p00 = data[yi0, xi0]
    p10 = data[yi0, xi1]
    p01 = data[yi1, xi0]
    p11 = data[yi1, xi1]
    return p00, p10, p01, p11, fx, fy


def bilinear_lookup(data: np.ndarray, coords: np.ndarray):
    """Vectorized bilinear interpolation at normalized coordinates.

    data: (H, W, C) array. coords: (..., 2) of (u, v). Returns
    (values (..., C), in_bounds (...)); out-of-extent queries give zero
    values, in-bounds queries near the border use edge-clamped pixels.
    """
    u = coords[..., 0]
    v = coords[..., 1]
    in_bounds = (u >= -1.0) & (u <= 1.0) & (v >= -1.0) & (v <= 1.0)
    x, y = _to_pixel_space(coords, data.shape[0], data.shape[1])
    p00, p10, p01, p11, fx, fy = _gather_corners(data, x, y)
    vals = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
    vals = np.where(in_bounds[..., None], vals, 0.0)
    return vals, in_bounds


def bilinear_lookup_grad(data: np.ndarray, coords: np.ndarray):
    """Bilinear values plus their derivative wrt normalized coordinates.

    Returns (values (..., C), grad (..., 2, C), in_bounds (...)). The gradient
    is the sub-pixel derivative of the bilinear kernel; it is zero for
    out-of-extent queries and along clamped borders (the surface is flat
    there). It is discontinuous on the pixel-center lattice.
    """
    h, w = data.shape[0], data.shape[1]
    u = coords[..., 0]
    v = coords[..., 1]
    in_bounds = (u >= -1.0) & (u <= 1.0) & (v >= -1.0) & (v <= 1.0)
    x, y = _to_pixel_space(coords, h, w)
    p00, p10, p01, p11, fx, fy = _gather_corners(data, x, y)
    vals = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
    # d/dx and d/dy in pixel units, then scale into normalized units
    ddx = (1.0 - fy) * (p10 - p00) + fy * (p11 - p01)
    ddy = (1.0 - fx) * (p01 - p00) + fx * (p11 - p10)
    grad = np.stack([ddx * (w / 2.0), ddy * (h / 2.0)], axis=-2)
    vals = np.where(in_bounds[..., None], vals, 0.0)
    grad = np.where(in_bounds[..., None, None], grad, 0.0)
    return vals, grad, in_bounds


def bilinear_at(image: Image, coord) -> tuple[np.ndarray, bool]:
    """Intensity vector (length C) and in-bounds flag at one normalized coord."""
    c = np.asarray(coord, dtype=np.float64)
    vals, inb = bilinear_lookup(image.data, c)
    return vals, bool(inb)


# ---------------------------------------------------------------------------
# Gaussian blur (multi-scale baseline)

def gaussian_blur(image: Image, std: float) -> Image:
    """Separable Gaussian blur with kernel radius ceil(3*std), edge-clamped.

    std=0 returns an identical copy. Kernel weights are normalized to sum 1,
    so constant images are preserved.
    """
    if std < 0:
        raise ValueError("std must be >= 0")
    if std == 0:
        return Image(image.data)
    radius = int(math.ceil(3.0 * std))
    out = gaussian_filter1d(image.data, std, axis=0, mode="nearest", radius=radius)
    out = gaussian_filter1d(out, std, axis=1, mode="nearest", radius=radius)
    return Image(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# File I/O: PGM/PPM (ASCII + binary, maxval <= 255) and 8-bit PNG (gray, RGB)

def load_image(path) -> Image:
    """Load a PGM (P2/P5), PPM (P3/P6), or 8-bit PNG file.

    Intensities are scaled from the file's bit depth into [0, 1]; grayscale
    gives channels=1, color gives channels=3.
    """
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise ImageFormatError(f"cannot read {path}: {e}") from e
    if blob.startswith(_PNG_SIG):
        arr = _decode_png(blob)
    elif blob[:2] in (b"P2", b"P3", b"P5", b"P6"):
        arr = _decode_pnm(blob)
    else:
        raise ImageFormatError(f"unsupported format: {path}")
    return Image(np.clip(arr, 0.0, 1.0))


def save_image(image: Image, path) -> None:
    """Write binary PGM (channels=1) or PPM (channels=3) with maxval 255.

    Values are clamped to [0, 1] and quantized with half-up rounding, so a
    save/load round trip is within 1/510 per value.
    """
    q = np.floor(np.clip(image.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(q.tobytes())
    except OSError as e:
        raise ImageFormatError(f"cannot write {path}: {e}") from e


def _decode_pnm(blob: bytes) -> np.ndarray:
    magic = blob[:2]
    pos = 2

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(blob):
            ch = blob[pos:pos + 1]
            if ch == b"#":  # comment to end of line
                while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("corrupt image: truncated PNM header")
        return blob[start:pos]

    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as e:
        raise ImageFormatError("corrupt image: bad PNM header") from e
    if width <= 0 or height <= 0:
        raise ImageFormatError("zero-dimension image")
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"unsupported PNM maxval {maxval} (must be 1..255)")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P2", b"P3"):
        try:
            vals = [int(next_token()) for _ in range(count)]
        except ImageFormatError:
            raise ImageFormatError("corrupt image: truncated PNM data") from None
        arr = np.array(vals, dtype=np.float64)
    else:
        pos += 1  # single whitespace after maxval
        raw = blob[pos:pos + count]
        if len(raw) < count:
            raise ImageFormatError("corrupt image: truncated PNM data")
        arr = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    return (arr / maxval).reshape(height, width, channels)


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _decode_png(blob: bytes) -> np.ndarray:
    pos = len(_PNG_SIG)
    ihdr = None
    idat = []
    while pos + 8 <= len(blob):
        length, ctype = struct.unpack(">I4s", blob[pos:pos + 8])
        data = blob[pos + 8:pos + 8 + length]
        crc_end = pos + 8 + length + 4
        if len(data) < length or crc_end > len(blob):
            raise ImageFormatError("corrupt image: truncated PNG chunk")
        (crc,) = struct.unpack(">I", blob[pos + 8 + length:crc_end])
        if zlib.crc32(ctype + data) & 0xFFFFFFFF != crc:
            raise ImageFormatError("corrupt image: PNG chunk CRC mismatch")
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", data)
        elif ctype == b"IDAT":
            idat.append(data)
        elif ctype == b"IEND":
            break
        pos = crc_end
    if ihdr is None or not idat:
        raise ImageFormatError("corrupt image: missing PNG chunks")
    width, height, depth, color, comp, filt, interlace = ihdr
    if width == 0 or height == 0:
        raise ImageFormatError("zero-dimension image")
    if depth != 8:
        raise ImageFormatError(f"unsupported PNG bit depth {depth} (only 8)")
    if color not in (0, 2):
        raise ImageFormatError(f"unsupported PNG color type {color} (only grayscale/RGB)")
    if comp != 0 or filt != 0:
        raise ImageFormatError("corrupt image: bad PNG compression/filter method")
    if interlace != 0:
        raise ImageFormatError("unsupported: interlaced PNG")
    channels = 1 if color == 0 else 3
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as e:
        raise ImageFormatError("corrupt image: bad PNG stream") from e
    stride = width * channels
    if len(raw) != height * (1 + stride):
        raise ImageFormatError("corrupt image: PNG data length mismatch")
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    for r in range(height):
        ftype = raw[r * (1 + stride)]
        line = np.frombuffer(raw, dtype=np.uint8,
                             count=stride, offset=r * (1 + stride) + 1)
        prev = _unfilter_row(ftype, line, prev, channels)
        out[r] = prev
    return out.reshape(height, width, channels).astype(np.float64) / 255.0


def _unfilter_row(ftype: int, line: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    if ftype == 0:
        return line.copy()
    if ftype == 1:  # Sub: per-phase running sum along the row
        rec = line.astype(np.uint64)
        for k in range(bpp):
            rec[k::bpp] = np.cumsum(rec[k::bpp])
        return (rec & 0xFF).astype(np.uint8)
    if ftype == 2:  # Up
        return line + prev  # uint8 wraps mod 256
    if ftype == 3:  # Average
        rec = np.empty_like(line)
        for i in range(len(line)):
            left = int(rec[i - bpp]) if i >= bpp else 0
            rec[i] = (int(line[i]) + (left + int(prev[i])) // 2) & 0xFF
        return rec
    if ftype == 4:  # Paeth
        rec = np.empty_like(line)
        for i in range(len(line)):
            a = int(rec[i - bpp]) if i >= bpp else 0
            b = int(prev[i])
            c = int(prev[i - bpp]) if i >= bpp else 0
            p = a + b - c
            pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
            if pa <= pb and pa <= pc:
                pred = a
            elif pb <= pc:
                pred = b
            else:
                pred = c
            rec[i] = (int(line[i]) + pred) & 0xFF
        return rec
    raise ImageFormatError(f"corrupt image: unknown PNG filter {ftype}")
