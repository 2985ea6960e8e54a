"""Forward samplers: bilinear, multi-scale, and linearized multi-sampling.

The linearized sampler draws Gaussian auxiliary samples around each output
pixel, fetches their intensities, and fits a per-pixel linear model
(spatial gradient rows + bias) by Tikhonov-regularized least squares. The
fitted model is the differentiable representation of the pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Image, NormCoord, bilinear_lookup, gaussian_blur, pixel_center_grid
from .rng import GaussianStream
from .transform import AffineParams, apply_grid

_AUX_STREAM = 0x5A
_COLLAPSE_STREAM = 0xC0


@dataclass(frozen=True)
class LinearizationConfig:
    """Knobs for the linearized sampler.

    k counts the center plus k-1 auxiliary draws. sigma is the per-axis
    auxiliary noise std in normalized output coordinates; None means match
    the output pixel size (2/out_w, 2/out_h), scaled by sigma_scale.
    """

    k: int = 8
    sigma: tuple[float, float] | None = None
    sigma_scale: float = 1.0
    epsilon: float = 1e-6
    collapse_prevention: bool = True
    include_bias: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2 (center plus at least one auxiliary)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.sigma_scale <= 0:
            raise ValueError("sigma_scale must be > 0")


def resolve_sigma(config: LinearizationConfig, out_h: int, out_w: int) -> tuple[float, float]:
    """Effective (sigma_u, sigma_v) for a given output shape."""
    if config.sigma is not None:
        return float(config.sigma[0]), float(config.sigma[1])
    return config.sigma_scale * 2.0 / out_w, config.sigma_scale * 2.0 / out_h


@dataclass(frozen=True)
class PixelLinearization:
    """Fitted linear model for one output pixel.

    a has rows (d/du, d/dv, bias) and one column per channel. When valid is
    False (the center query fell outside the source), a is the zero matrix
    and the pixel contributes zero gradient.
    """

    a: np.ndarray                      # (3, C)
    center_intensity: np.ndarray       # (C,)
    center_coord_transformed: NormCoord
    valid: bool


@dataclass(frozen=True)
class LinearizationGrid:
    """Per-pixel linear models for a full output grid, stored as arrays."""

    a: np.ndarray                 # (H, W, 3, C)
    center_intensity: np.ndarray  # (H, W, C)
    center_coord: np.ndarray      # (H, W, 2) transformed center coordinates
    valid: np.ndarray             # (H, W) bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape[0], self.a.shape[1]

    def at(self, row: int, col: int) -> PixelLinearization:
        return PixelLinearization(
            a=self.a[row, col],
            center_intensity=self.center_intensity[row, col],
            center_coord_transformed=NormCoord(*self.center_coord[row, col]),
            valid=bool(self.valid[row, col]),
        )


@dataclass(frozen=True)
class SampledOutput:
    """Warped image plus (for the linearized sampler) its per-pixel models."""

    image: Image
    linearizations: LinearizationGrid | None = None


# ---------------------------------------------------------------------------
# Baseline samplers

def sample_bilinear(src: Image, params: AffineParams, out_h: int, out_w: int) -> SampledOutput:
    """Plain bilinear warp; out-of-bounds pixels are zero."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output shape must be >= 1x1")
    coords = apply_grid(params, pixel_center_grid(out_h, out_w))
    vals, _ = bilinear_lookup(src.data, coords)
    return SampledOutput(image=Image(vals))


def sample_multiscale(src: Image, params: AffineParams, out_h: int, out_w: int,
                      stds=(1.0, 5.0, 10.0)) -> SampledOutput:
    """Average of bilinear warps of Gaussian-blurred copies of the source."""
    if not stds:
        raise ValueError("stds must be non-empty")
    levels = [gaussian_blur(src, s) for s in stds]
    return _sample_levels([lv.data for lv in levels], params, out_h, out_w)


def _sample_levels(level_data: list[np.ndarray], params: AffineParams,
                   out_h: int, out_w: int) -> SampledOutput:
    if out_h < 1 or out_w < 1:
        raise ValueError("output shape must be >= 1x1")
    coords = apply_grid(params, pixel_center_grid(out_h, out_w))
    base, _ = bilinear_lookup(level_data[0], coords)
    if len(level_data) == 1:
        return SampledOutput(image=Image(base))
    # anchored mean: exact when all levels agree (e.g. stds all zero)
    acc = np.zeros_like(base)
    for data in level_data[1:]:
        vals, _ = bilinear_lookup(data, coords)
        acc += vals - base
    return SampledOutput(image=Image(base + acc / len(level_data)))


# ---------------------------------------------------------------------------
# Linearized multi-sampling

def generate_aux_offsets(config: LinearizationConfig, out_h: int, out_w: int,
                         rng: GaussianStream) -> np.ndarray:
    """Gaussian offsets for the k-1 auxiliary samples of every output pixel.

    Returns (out_h, out_w, k-1, 2) in normalized output coordinates. The
    center sample (index 0) carries zero offset and is not drawn.
    """
    sigma_u, sigma_v = resolve_sigma(config, out_h, out_w)
    n_aux = config.k - 1
    draws = rng.pixel_normals(out_h * out_w, 2 * n_aux)
    offs = draws.reshape(out_h, out_w, n_aux, 2)
    offs[..., 0] *= sigma_u
    offs[..., 1] *= sigma_v
    return offs


def collapse_perturb(transformed_coords: np.ndarray, src_h: int, src_w: int,
                     rng: GaussianStream, enabled: bool = True) -> np.ndarray:
    """Post-transform jitter of auxiliary samples to prevent sample collapse.

    Adds Gaussian noise with std = one source-pixel width/height to the
    transformed auxiliary coordinates (never the center sample, which is not
    part of this array). Disabled -> coordinates returned unchanged.
    """
    if not enabled:
        return transformed_coords
    h, w, n_aux = transformed_coords.shape[:3]
    draws = rng.pixel_normals(h * w, 2 * n_aux).reshape(h, w, n_aux, 2)
    out = transformed_coords.copy()
    out[..., 0] += draws[..., 0] * (2.0 / src_w)
    out[..., 1] += draws[..., 1] * (2.0 / src_h)
    return out


def _solve_sym3(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve m @ x = rhs for batched symmetric positive-definite 3x3 m.

    m: (N, 3, 3), rhs: (N, 3, C). Cofactor-based inverse; with the Tikhonov
    shift the determinant is bounded away from zero.
    """
    a = m[:, 0, 0]
    b = m[:, 0, 1]
    c = m[:, 0, 2]
    d = m[:, 1, 1]
    e = m[:, 1, 2]
    f = m[:, 2, 2]
    c00 = d * f - e * e
    c01 = c * e - b * f
    c02 = b * e - c * d
    c11 = a * f - c * c
    c12 = b * c - a * e
    c22 = a * d - b * b
    det = a * c00 + b * c01 + c * c02
    inv = np.empty_like(m)
    inv[:, 0, 0] = c00
    inv[:, 0, 1] = inv[:, 1, 0] = c01
    inv[:, 0, 2] = inv[:, 2, 0] = c02
    inv[:, 1, 1] = c11
    inv[:, 1, 2] = inv[:, 2, 1] = c12
    inv[:, 2, 2] = c22
    inv /= det[:, None, None]
    return np.einsum("nab,nbc->nac", inv, rhs)


def _fit_batch(d_coords: np.ndarray, d_intens: np.ndarray, aux_valid: np.ndarray,
               epsilon: float) -> np.ndarray:
    """Tikhonov least-squares fit of (N, 3, C) linear models.

    d_coords: (N, K-1, 2) transformed-coordinate differences from the center.
    d_intens: (N, K-1, C) intensity differences. Rows with aux_valid False are
    zeroed in both data matrices, which removes them from the normal
    equations.
    """
    n, n_aux = d_coords.shape[0], d_coords.shape[1]
    w = aux_valid.astype(np.float64)[..., None]
    x = np.empty((n, n_aux, 3))
    x[:, :, :2] = d_coords
    x[:, :, 2] = 1.0
    x *= w
    y = d_intens * w
    m = np.einsum("nka,nkb->nab", x, x)
    m[:, 0, 0] += epsilon
    m[:, 1, 1] += epsilon
    m[:, 2, 2] += epsilon
    rhs = np.einsum("nka,nkc->nac", x, y)
    return _solve_sym3(m, rhs)


def fit_linearization(center_intensity, center_coord, aux_intensities, aux_coords,
                      aux_valid, epsilon: float) -> PixelLinearization:
    """Fit one pixel's linear model from its center and auxiliary samples.

    center_coord and aux_coords are transformed (source-space) normalized
    coordinates; a center outside the extent yields valid=False with zero a
    and zero center intensity.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    center_intensity = np.atleast_1d(np.asarray(center_intensity, dtype=np.float64))
    aux_intensities = np.asarray(aux_intensities, dtype=np.float64)
    if aux_intensities.ndim == 1:
        aux_intensities = aux_intensities[:, None]
    aux_coords = np.asarray(aux_coords, dtype=np.float64)
    aux_valid = np.asarray(aux_valid, dtype=bool)
    cu, cv = float(center_coord[0]), float(center_coord[1])
    center_ok = -1.0 <= cu <= 1.0 and -1.0 <= cv <= 1.0
    if not center_ok:
        c = center_intensity.shape[0]
        return PixelLinearization(np.zeros((3, c)), np.zeros(c), NormCoord(cu, cv), False)
    d_coords = (aux_coords - np.array([cu, cv]))[None]
    d_intens = (aux_intensities - center_intensity)[None]
    a = _fit_batch(d_coords, d_intens, aux_valid[None], epsilon)[0]
    return PixelLinearization(a, center_intensity, NormCoord(cu, cv), True)


def sample_linearized(src: Image, params: AffineParams, out_h: int, out_w: int,
                      config: LinearizationConfig = LinearizationConfig(),
                      rng: GaussianStream | None = None) -> SampledOutput:
    """Warp with linearized multi-sampling; keeps the per-pixel models.

    Per pixel: draw auxiliary offsets in output space, transform center and
    auxiliaries to source space, jitter the auxiliaries if collapse
    prevention is on, fetch all intensities bilinearly, and fit the linear
    model. Forward intensity is the center intensity plus the fitted bias
    (or the center alone with include_bias=False, which reproduces plain
    bilinear sampling bit for bit).
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output shape must be >= 1x1")
    if rng is None:
        rng = GaussianStream(config.seed)
    centers = pixel_center_grid(out_h, out_w)
    offsets = generate_aux_offsets(config, out_h, out_w, rng.substream(_AUX_STREAM))
    aux = centers[:, :, None, :] + offsets
    t_center = apply_grid(params, centers)
    t_aux = apply_grid(params, aux)
    t_aux = collapse_perturb(t_aux, src.height, src.width,
                             rng.substream(_COLLAPSE_STREAM), config.collapse_prevention)

    center_vals, center_in = bilinear_lookup(src.data, t_center)
    aux_vals, aux_in = bilinear_lookup(src.data, t_aux)

    n = out_h * out_w
    c = src.channels
    n_aux = config.k - 1
    a = _fit_batch(
        (t_aux - t_center[:, :, None, :]).reshape(n, n_aux, 2),
        (aux_vals - center_vals[:, :, None, :]).reshape(n, n_aux, c),
        aux_in.reshape(n, n_aux),
        config.epsilon,
    ).reshape(out_h, out_w, 3, c)
    a = np.where(center_in[:, :, None, None], a, 0.0)
    center_vals = np.where(center_in[:, :, None], center_vals, 0.0)

    if config.include_bias:
        out_img = center_vals + a[:, :, 2, :]
    else:
        out_img = center_vals
    grid = LinearizationGrid(a=a, center_intensity=center_vals,
                             center_coord=t_center, valid=center_in)
    return SampledOutput(image=Image(out_img), linearizations=grid)
