"""Image container, coordinates, bilinear lookup, blur, and file round trips."""

import struct
import zlib

import numpy as np
import pytest

from linwarp.raster import (
    Image,
    ImageFormatError,
    bilinear_at,
    bilinear_lookup,
    bilinear_lookup_grad,
    gaussian_blur,
    load_image,
    pixel_center,
    pixel_center_grid,
    save_image,
)


def _rand_image(rng, h, w, c=1):
    return Image(rng.uniform(0.0, 1.0, size=(h, w, c)))


# ---------------------------------------------------------------------------
# Image container

def test_image_promotes_2d_to_single_channel():
    img = Image(np.zeros((4, 6)))
    assert img.data.shape == (4, 6, 1)
    assert (img.height, img.width, img.channels) == (4, 6, 1)


def test_image_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4, 2)))
    with pytest.raises(ValueError):
        Image(np.zeros((2, 2, 1, 1)))
    with pytest.raises(ValueError):
        Image(np.zeros((0, 5)))


def test_image_rejects_non_finite():
    data = np.zeros((3, 3))
    data[1, 1] = np.nan
    with pytest.raises(ValueError):
        Image(data)


def test_image_is_copied_and_read_only():
    src = np.ones((2, 2))
    img = Image(src)
    src[0, 0] = 5.0
    assert img.data[0, 0, 0] == 1.0
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 2.0


# ---------------------------------------------------------------------------
# Coordinates

def test_pixel_center_half_pixel_convention():
    assert pixel_center(0, 0, 4, 4) == (-0.75, -0.75)
    assert pixel_center(3, 3, 4, 4) == (0.75, 0.75)
    assert pixel_center(1, 2, 8, 4) == (0.25, -0.625)


def test_pixel_center_grid_matches_scalar():
    grid = pixel_center_grid(3, 7)
    assert grid.shape == (3, 7, 2)
    for r in range(3):
        for c in range(7):
            u, v = pixel_center(r, c, 3, 7)
            assert grid[r, c, 0] == u
            assert grid[r, c, 1] == v


# ---------------------------------------------------------------------------
# Bilinear lookup

def test_lookup_at_pixel_centers_reproduces_data():
    rng = np.random.default_rng(0)
    img = _rand_image(rng, 7, 5, 3)
    vals, inb = bilinear_lookup(img.data, pixel_center_grid(7, 5))
    assert inb.all()
    np.testing.assert_allclose(vals, img.data, atol=1e-12)


def test_lookup_midpoint_averages_neighbors():
    rng = np.random.default_rng(1)
    img = _rand_image(rng, 1, 4)
    ua = pixel_center(0, 1, 1, 4).u
    ub = pixel_center(0, 2, 1, 4).u
    mid = np.array([(ua + ub) / 2.0, 0.0])
    vals, _ = bilinear_lookup(img.data, mid)
    expect = (img.data[0, 1, 0] + img.data[0, 2, 0]) / 2.0
    np.testing.assert_allclose(vals[0], expect, atol=1e-12)


def test_lookup_reproduces_planes_between_centers():
    # bilinear interpolation is exact for functions affine in (u, v)
    rng = np.random.default_rng(2)
    a, b, c = 0.3, -0.7, 0.45
    grid = pixel_center_grid(16, 12)
    img = Image(a * grid[:, :, 0] + b * grid[:, :, 1] + c)
    coords = rng.uniform(-0.85, 0.85, size=(200, 2))
    vals, inb = bilinear_lookup(img.data, coords)
    assert inb.all()
    expect = a * coords[:, 0] + b * coords[:, 1] + c
    np.testing.assert_allclose(vals[:, 0], expect, atol=1e-12)


def test_lookup_out_of_bounds_is_zero_with_false_mask():
    img = Image(np.ones((4, 4)))
    coords = np.array([
        [-1.0, -1.0],   # corner: still inside
        [1.0, 1.0],
        [-1.0 - 1e-9, 0.0],
        [0.0, 1.0 + 1e-9],
        [3.0, 0.0],
    ])
    vals, inb = bilinear_lookup(img.data, coords)
    assert inb.tolist() == [True, True, False, False, False]
    assert vals[2:].sum() == 0.0
    assert (vals[:2] == 1.0).all()


def test_lookup_edge_clamp_extends_border_values():
    # inside the extent but beyond the outermost pixel centers: clamped,
    # so the border value is reported, not a fade to zero
    rng = np.random.default_rng(3)
    img = _rand_image(rng, 6, 6)
    vals, inb = bilinear_lookup(img.data, np.array([-0.999, -0.999]))
    assert inb
    np.testing.assert_allclose(vals[0], img.data[0, 0, 0], atol=1e-12)


def test_bilinear_at_matches_grid_lookup():
    rng = np.random.default_rng(4)
    img = _rand_image(rng, 5, 5, 3)
    coord = (0.21, -0.4)
    vec, ok = bilinear_at(img, coord)
    vals, _ = bilinear_lookup(img.data, np.array(coord))
    assert ok
    np.testing.assert_array_equal(vec, vals)


def test_lookup_grad_matches_plane_slopes():
    a, b, c = 0.4, -0.25, 0.5
    grid = pixel_center_grid(20, 20)
    img = Image(a * grid[:, :, 0] + b * grid[:, :, 1] + c)
    rng = np.random.default_rng(5)
    coords = rng.uniform(-0.8, 0.8, size=(100, 2))
    _, grad, inb = bilinear_lookup_grad(img.data, coords)
    assert inb.all()
    np.testing.assert_allclose(grad[:, 0, 0], a, atol=1e-10)
    np.testing.assert_allclose(grad[:, 1, 0], b, atol=1e-10)


def test_lookup_grad_matches_finite_differences():
    rng = np.random.default_rng(6)
    img = _rand_image(rng, 9, 11, 3)
    h, w = 9, 11
    step = 1e-6
    checked = 0
    while checked < 60:
        coord = rng.uniform(-0.9, 0.9, size=2)
        # stay clear of the pixel-center lattice where the kernel kinks
        x = (coord[0] + 1.0) * w / 2.0 - 0.5
        y = (coord[1] + 1.0) * h / 2.0 - 0.5
        if min(x % 1.0, 1.0 - x % 1.0) < 0.05 or min(y % 1.0, 1.0 - y % 1.0) < 0.05:
            continue
        _, grad, _ = bilinear_lookup_grad(img.data, coord)
        for axis in range(2):
            hi = coord.copy()
            lo = coord.copy()
            hi[axis] += step
            lo[axis] -= step
            vh, _ = bilinear_lookup(img.data, hi)
            vl, _ = bilinear_lookup(img.data, lo)
            fd = (vh - vl) / (2.0 * step)
            np.testing.assert_allclose(grad[axis], fd, atol=1e-8)
        checked += 1


def test_lookup_grad_zero_out_of_bounds():
    rng = np.random.default_rng(7)
    img = _rand_image(rng, 4, 4)
    _, grad, inb = bilinear_lookup_grad(img.data, np.array([1.5, 0.0]))
    assert not inb
    assert (grad == 0.0).all()


# ---------------------------------------------------------------------------
# Gaussian blur

def test_blur_zero_std_is_identity():
    rng = np.random.default_rng(8)
    img = _rand_image(rng, 5, 5)
    out = gaussian_blur(img, 0.0)
    np.testing.assert_array_equal(out.data, img.data)


def test_blur_preserves_constants():
    img = Image(np.full((8, 8), 0.37))
    out = gaussian_blur(img, 2.5)
    np.testing.assert_allclose(out.data, 0.37, atol=1e-12)


def test_blur_negative_std_raises():
    with pytest.raises(ValueError):
        gaussian_blur(Image(np.zeros((2, 2))), -1.0)


def test_blur_impulse_is_symmetric():
    data = np.zeros((15, 15))
    data[7, 7] = 1.0
    out = gaussian_blur(Image(data), 1.5).data[:, :, 0]
    np.testing.assert_allclose(out, out[::-1, :], atol=1e-14)
    np.testing.assert_allclose(out, out[:, ::-1], atol=1e-14)
    np.testing.assert_allclose(out, out.T, atol=1e-14)


def test_blur_matches_hand_convolution_on_row():
    # single-row image: vertical pass is a no-op under edge clamping, so the
    # result is a 1-d convolution we can write out directly
    rng = np.random.default_rng(9)
    row = rng.uniform(0.2, 0.8, size=24)
    std = 1.3
    radius = int(np.ceil(3.0 * std))
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / std) ** 2)
    taps /= taps.sum()
    padded = np.pad(row, radius, mode="edge")
    expect = np.convolve(padded, taps[::-1], mode="valid")
    out = gaussian_blur(Image(row[None, :]), std).data[0, :, 0]
    np.testing.assert_allclose(out, expect, atol=1e-12)


# ---------------------------------------------------------------------------
# PGM / PPM round trips

def test_save_load_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    img = _rand_image(rng, 6, 9)
    path = tmp_path / "x.pgm"
    save_image(img, path)
    back = load_image(path)
    assert back.data.shape == img.data.shape
    assert np.abs(back.data - img.data).max() <= 0.5 / 255.0 + 1e-12


def test_save_load_ppm_roundtrip_is_exact_on_grid_values(tmp_path):
    rng = np.random.default_rng(11)
    levels = rng.integers(0, 256, size=(4, 5, 3))
    img = Image(levels / 255.0)
    path = tmp_path / "x.ppm"
    save_image(img, path)
    back = load_image(path)
    np.testing.assert_array_equal(back.data, levels / 255.0)


def test_save_rounds_half_up(tmp_path):
    img = Image(np.array([[0.5 / 255.0, 1.49 / 255.0]]))
    path = tmp_path / "r.pgm"
    save_image(img, path)
    assert np.frombuffer(path.read_bytes()[-2:], dtype=np.uint8).tolist() == [1, 1]


def test_load_ascii_pgm_with_comments(tmp_path):
    text = "P2 # magic\n# a comment line\n3 2\n# another\n100\n0 50 100\n25 75 10\n"
    path = tmp_path / "a.pgm"
    path.write_text(text)
    img = load_image(path)
    expect = np.array([[0, 50, 100], [25, 75, 10]]) / 100.0
    np.testing.assert_array_equal(img.data[:, :, 0], expect)


def test_load_ascii_ppm(tmp_path):
    path = tmp_path / "a.ppm"
    path.write_text("P3\n1 2\n255\n10 20 30\n40 50 60\n")
    img = load_image(path)
    expect = np.array([[[10, 20, 30]], [[40, 50, 60]]]) / 255.0
    np.testing.assert_array_equal(img.data, expect)


def test_load_binary_pgm_scales_by_maxval(tmp_path):
    path = tmp_path / "b.pgm"
    path.write_bytes(b"P5\n2 1\n200\n" + bytes([0, 200]))
    img = load_image(path)
    np.testing.assert_array_equal(img.data[:, :, 0], [[0.0, 1.0]])


@pytest.mark.parametrize("body,msg", [
    (b"P2\n2 2\n255\n1 2 3\n", "truncated"),
    (b"P5\n2 2\n255\n\x01\x02\x03", "truncated"),
    (b"P2\n2 two\n255\n1 2 3 4\n", "bad PNM header"),
    (b"P2\n0 2\n255\n", "zero-dimension"),
    (b"P2\n2 2\n300\n1 2 3 4\n", "maxval"),
    (b"P2\n2 2\n0\n1 2 3 4\n", "maxval"),
])
def test_corrupt_pnm_raises(tmp_path, body, msg):
    path = tmp_path / "bad.pgm"
    path.write_bytes(body)
    with pytest.raises(ImageFormatError, match=msg):
        load_image(path)


def test_unknown_format_raises(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"GIF89a....")
    with pytest.raises(ImageFormatError, match="unsupported format"):
        load_image(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(ImageFormatError, match="cannot read"):
        load_image(tmp_path / "nope.pgm")


# ---------------------------------------------------------------------------
# PNG decoding, against a test-local encoder

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(ctype: bytes, data: bytes) -> bytes:
    return (struct.pack(">I", len(data)) + ctype + data
            + struct.pack(">I", zlib.crc32(ctype + data) & 0xFFFFFFFF))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _filter_row(ftype: int, row: np.ndarray, prev: np.ndarray, bpp: int) -> bytes:
    out = bytearray()
    for i in range(len(row)):
        left = int(row[i - bpp]) if i >= bpp else 0
        up = int(prev[i])
        ul = int(prev[i - bpp]) if i >= bpp else 0
        raw = int(row[i])
        if ftype == 0:
            out.append(raw)
        elif ftype == 1:
            out.append((raw - left) & 0xFF)
        elif ftype == 2:
            out.append((raw - up) & 0xFF)
        elif ftype == 3:
            out.append((raw - (left + up) // 2) & 0xFF)
        else:
            out.append((raw - _paeth(left, up, ul)) & 0xFF)
    return bytes(out)


def _encode_png(arr: np.ndarray, filters=None) -> bytes:
    """Minimal PNG writer for 8-bit grayscale/RGB, one filter type per row."""
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    color = 0 if c == 1 else 2
    filters = [0] * h if filters is None else filters
    flat = arr.reshape(h, w * c).astype(np.uint8)
    raw = bytearray()
    prev = np.zeros(w * c, dtype=np.uint8)
    for r in range(h):
        raw.append(filters[r])
        raw.extend(_filter_row(filters[r], flat[r], prev, c))
        prev = flat[r]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color, 0, 0, 0)
    return (_PNG_SIG + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(bytes(raw)))
            + _chunk(b"IEND", b""))


@pytest.mark.parametrize("channels", [1, 3])
def test_png_roundtrip_all_filters(tmp_path, channels):
    rng = np.random.default_rng(12 + channels)
    levels = rng.integers(0, 256, size=(6, 4, channels)).astype(np.uint8)
    filters = [0, 1, 2, 3, 4, 1]
    path = tmp_path / "f.png"
    path.write_bytes(_encode_png(levels, filters))
    img = load_image(path)
    assert img.channels == channels
    np.testing.assert_array_equal(img.data, levels / 255.0)


def test_png_gradient_image_roundtrip(tmp_path):
    # smooth content makes every filter's arithmetic visible
    y, x = np.mgrid[0:16, 0:16]
    levels = ((x * 7 + y * 13) % 256).astype(np.uint8)
    path = tmp_path / "g.png"
    path.write_bytes(_encode_png(levels, filters=[4] * 16))
    img = load_image(path)
    np.testing.assert_array_equal(img.data[:, :, 0], levels / 255.0)


def test_png_crc_mismatch_raises(tmp_path):
    levels = np.arange(16, dtype=np.uint8).reshape(4, 4)
    blob = bytearray(_encode_png(levels))
    blob[len(_PNG_SIG) + 8 + 2] ^= 0xFF  # flip a byte inside IHDR data
    path = tmp_path / "c.png"
    path.write_bytes(bytes(blob))
    with pytest.raises(ImageFormatError, match="CRC"):
        load_image(path)


def test_png_truncated_raises(tmp_path):
    blob = _encode_png(np.zeros((4, 4), dtype=np.uint8))
    path = tmp_path / "t.png"
    # cut inside the IDAT payload so the declared chunk length overruns
    path.write_bytes(blob[:len(_PNG_SIG) + 25 + 8 + 3])
    with pytest.raises(ImageFormatError, match="truncated PNG chunk"):
        load_image(path)


def _rebuild_ihdr(blob: bytes, **kw) -> bytes:
    fields = dict(zip(("w", "h", "depth", "color", "comp", "filt", "inter"),
                      struct.unpack(">IIBBBBB", blob[len(_PNG_SIG) + 8:len(_PNG_SIG) + 8 + 13])))
    fields.update(kw)
    ihdr = struct.pack(">IIBBBBB", *fields.values())
    rest = blob[len(_PNG_SIG) + 8 + 13 + 4:]
    return _PNG_SIG + _chunk(b"IHDR", ihdr) + rest


@pytest.mark.parametrize("kw,msg", [
    ({"depth": 16}, "bit depth"),
    ({"color": 6}, "color type"),
    ({"inter": 1}, "interlaced"),
    ({"w": 0}, "zero-dimension"),
])
def test_png_unsupported_headers_raise(tmp_path, kw, msg):
    blob = _encode_png(np.zeros((4, 4), dtype=np.uint8))
    path = tmp_path / "u.png"
    path.write_bytes(_rebuild_ihdr(blob, **kw))
    with pytest.raises(ImageFormatError, match=msg):
        load_image(path)


def test_png_bad_zlib_stream_raises(tmp_path):
    ihdr = struct.pack(">IIBBBBB", 2, 2, 8, 0, 0, 0, 0)
    blob = (_PNG_SIG + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", b"not zlib") + _chunk(b"IEND", b""))
    path = tmp_path / "z.png"
    path.write_bytes(blob)
    with pytest.raises(ImageFormatError, match="bad PNG stream"):
        load_image(path)


def test_png_length_mismatch_raises(tmp_path):
    ihdr = struct.pack(">IIBBBBB", 2, 2, 8, 0, 0, 0, 0)
    blob = (_PNG_SIG + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(b"\x00\x01")) + _chunk(b"IEND", b""))
    path = tmp_path / "l.png"
    path.write_bytes(blob)
    with pytest.raises(ImageFormatError, match="length mismatch"):
        load_image(path)


def test_png_missing_idat_raises(tmp_path):
    ihdr = struct.pack(">IIBBBBB", 2, 2, 8, 0, 0, 0, 0)
    blob = _PNG_SIG + _chunk(b"IHDR", ihdr) + _chunk(b"IEND", b"")
    path = tmp_path / "m.png"
    path.write_bytes(blob)
    with pytest.raises(ImageFormatError, match="missing"):
        load_image(path)
