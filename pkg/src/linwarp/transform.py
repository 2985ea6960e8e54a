"""5-parameter affine transforms on normalized coordinates.

The transform maps output coordinates to source coordinates (inverse
warping): scale first, then rotation, then translation,
    T(x) = R(rot) @ diag(exp(log_sx), exp(log_sy)) @ x + (tx, ty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import NormCoord

PARAM_NAMES = ("tx", "ty", "rot", "log_sx", "log_sy")


@dataclass(frozen=True)
class AffineParams:
    """Translation, rotation (radians), and per-axis log scale."""

    tx: float = 0.0
    ty: float = 0.0
    rot: float = 0.0
    log_sx: float = 0.0
    log_sy: float = 0.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite parameter {name}")

    @staticmethod
    def identity() -> "AffineParams":
        return AffineParams()

    def as_vector(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.rot, self.log_sx, self.log_sy])

    @staticmethod
    def from_vector(vec) -> "AffineParams":
        v = np.asarray(vec, dtype=np.float64).reshape(5)
        return AffineParams(*[float(x) for x in v])

    def to_csv(self) -> str:
        """Five comma-separated reals: tx,ty,rot,log_sx,log_sy."""
        return ",".join(repr(float(getattr(self, n))) for n in PARAM_NAMES)

    @staticmethod
    def from_csv(text: str) -> "AffineParams":
        parts = text.split(",")
        if len(parts) != 5:
            raise ValueError(f"expected 5 comma-separated values, got {len(parts)}")
        return AffineParams(*[float(p) for p in parts])


def apply_grid(params: AffineParams, coords: np.ndarray) -> np.ndarray:
    """Apply the transform to an (..., 2) array of (u, v) coordinates."""
    coords = np.asarray(coords, dtype=np.float64)
    c = math.cos(params.rot)
    s = math.sin(params.rot)
    su = math.exp(params.log_sx) * coords[..., 0]
    sv = math.exp(params.log_sy) * coords[..., 1]
    out = np.empty_like(coords)
    out[..., 0] = c * su - s * sv + params.tx
    out[..., 1] = s * su + c * sv + params.ty
    return out


def apply(params: AffineParams, coord) -> NormCoord:
    """Transform a single normalized coordinate."""
    out = apply_grid(params, np.asarray(coord, dtype=np.float64))
    return NormCoord(float(out[0]), float(out[1]))


def jacobian_grid(params: AffineParams, coords: np.ndarray) -> np.ndarray:
    """d apply(params, coord) / d params for an (..., 2) coordinate array.

    Returns (..., 2, 5) with parameter order (tx, ty, rot, log_sx, log_sy).
    """
    coords = np.asarray(coords, dtype=np.float64)
    c = math.cos(params.rot)
    s = math.sin(params.rot)
    su = math.exp(params.log_sx) * coords[..., 0]
    sv = math.exp(params.log_sy) * coords[..., 1]
    jac = np.zeros(coords.shape[:-1] + (2, 5))
    jac[..., 0, 0] = 1.0
    jac[..., 1, 1] = 1.0
    jac[..., 0, 2] = -s * su - c * sv
    jac[..., 1, 2] = c * su - s * sv
    jac[..., 0, 3] = c * su
    jac[..., 1, 3] = s * su
    jac[..., 0, 4] = -s * sv
    jac[..., 1, 4] = c * sv
    return jac


def jacobian(params: AffineParams, coord) -> np.ndarray:
    """2x5 Jacobian of the transformed coordinate wrt the five parameters."""
    return jacobian_grid(params, np.asarray(coord, dtype=np.float64))


_CORNERS = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])


def corner_reprojection_error(est: AffineParams, gt: AffineParams,
                              out_height: int, out_width: int,
                              src_height: int, src_width: int) -> float:
    """Mean source-pixel distance of the four output-domain corners.

    Corners (+-1, +-1) are mapped through both transforms; normalized
    displacements are converted to source pixels before averaging.
    """
    if min(out_height, out_width, src_height, src_width) <= 0:
        raise ValueError("dimensions must be positive")
    d = apply_grid(est, _CORNERS) - apply_grid(gt, _CORNERS)
    d[:, 0] *= src_width / 2.0
    d[:, 1] *= src_height / 2.0
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))
