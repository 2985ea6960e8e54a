"""Synthetic plane and texture generators."""

import numpy as np
import pytest

from linwarp.raster import gaussian_blur, pixel_center_grid
from linwarp.textures import generate_texture, plane_image


def test_plane_is_exact_at_pixel_centers():
    a, b, c = 0.7, -0.4, 0.1
    img = plane_image(6, 9, (a, b, c))
    grid = pixel_center_grid(6, 9)
    expect = a * grid[:, :, 0] + b * grid[:, :, 1] + c
    np.testing.assert_array_equal(img.data[:, :, 0], expect)


def test_plane_multichannel_rows():
    coeffs = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    img = plane_image(4, 4, coeffs)
    assert img.channels == 3
    grid = pixel_center_grid(4, 4)
    np.testing.assert_array_equal(img.data[:, :, 0], grid[:, :, 0])
    np.testing.assert_array_equal(img.data[:, :, 1], grid[:, :, 1])
    np.testing.assert_array_equal(img.data[:, :, 2], np.ones((4, 4)))


def test_plane_rejects_bad_coeffs():
    with pytest.raises(ValueError):
        plane_image(4, 4, (1.0, 2.0))


def test_texture_deterministic_by_seed():
    a = generate_texture(7, 32, 32)
    b = generate_texture(7, 32, 32)
    c = generate_texture(8, 32, 32)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_texture_shape_and_channels():
    img = generate_texture(1, 24, 40, channels=3)
    assert img.data.shape == (24, 40, 3)
    assert not np.array_equal(img.data[:, :, 0], img.data[:, :, 1])


def test_texture_normalized_range():
    img = generate_texture(3, 48, 48)
    assert np.isclose(img.data.min(), 0.05, atol=1e-12)
    assert np.isclose(img.data.max(), 0.95, atol=1e-12)


def test_texture_has_coarse_structure():
    # a heavy low-frequency component must survive smoothing, otherwise
    # alignment problems built on these images would have no basin
    img = generate_texture(5, 64, 64)
    low = gaussian_blur(img, 3.0)
    assert np.var(low.data) > 0.05 * np.var(img.data)


def test_texture_has_fine_detail():
    img = generate_texture(5, 64, 64)
    low = gaussian_blur(img, 1.0)
    assert np.var(img.data - low.data) > 1e-4
