"""Synthetic test images: exact planes and seeded Gabor-patch textures."""

from __future__ import annotations

import numpy as np

from .raster import Image, pixel_center_grid

# Octave population of the texture generator. Patch count per octave grows as
# (span / wavelength)^2 so every scale covers the frame, which gives the field
# a dense, roughly power-law spectrum; TILT > 0 shifts energy toward coarse
# structure so alignment problems keep a usable convergence basin.
_DENSITY = 1.2
_MIN_WAVELENGTH = 2.0
_RAMP_AMP = 0.3
_TILT = 0.35


def plane_image(height: int, width: int, coeffs) -> Image:
    """Image whose intensity is exactly a*u + b*v + c at every pixel center.

    coeffs is (a, b, c) for a single channel or a (C, 3) row per channel.
    Values are not clamped; planes are analysis fixtures, not display images.
    """
    arr = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if arr.shape[1] != 3:
        raise ValueError("coeffs must be (a, b, c) rows")
    grid = pixel_center_grid(height, width)
    u = grid[..., 0][..., None]
    v = grid[..., 1][..., None]
    return Image(arr[:, 0] * u + arr[:, 1] * v + arr[:, 2])


def generate_texture(seed: int, height: int, width: int,
                     channels: int = 1) -> Image:
    """Seeded texture: oriented Gabor patches at octave-spaced scales + ramp.

    Wavelengths run from the full frame span down to ~2 px, halving per
    octave, with per-octave patch counts that keep the frame covered at every
    scale. The result resembles a natural-image spectrum: coarse structure to
    steer coarse alignment plus fine detail that a decimating sampler cannot
    resolve. Output is normalized to [0.05, 0.95] per channel.
    """
    rng = np.random.default_rng(seed)
    span = float(max(height, width))
    img = np.empty((height, width, channels))
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    for ch in range(channels):
        gu, gv = rng.normal(size=2)
        field = _RAMP_AMP * (gu * xs / span + gv * ys / span)
        lam = span
        while lam >= _MIN_WAVELENGTH:
            n = max(1, int(round(_DENSITY * (span / lam) ** 2)))
            sig = 0.6 * lam
            gain = (lam / _MIN_WAVELENGTH) ** _TILT
            for _ in range(n):
                cx = rng.uniform(-lam, width + lam)
                cy = rng.uniform(-lam, height + lam)
                theta = rng.uniform(0.0, np.pi)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                amp = gain * rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)
                # patches only touch pixels within 3 envelope sigmas
                reach = 3.0 * sig
                x0, x1 = max(0, int(cx - reach)), min(width, int(cx + reach) + 1)
                y0, y1 = max(0, int(cy - reach)), min(height, int(cy + reach) + 1)
                if x0 >= x1 or y0 >= y1:
                    continue
                dx = xs[:, x0:x1] - cx
                dy = ys[y0:y1, :] - cy
                env = np.exp(-(dx * dx + dy * dy) / (2.0 * sig * sig))
                wave = np.cos(
                    2.0 * np.pi * (np.cos(theta) * dx + np.sin(theta) * dy) / lam
                    + phase)
                field[y0:y1, x0:x1] += amp * env * wave
            lam /= 2.0
        lo = field.min()
        hi = field.max()
        rng_span = hi - lo if hi > lo else 1.0
        img[..., ch] = 0.05 + 0.9 * (field - lo) / rng_span
    return Image(img)
