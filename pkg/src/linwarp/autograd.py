"""Backward pass through the warp into the five transform parameters.

All samplers share the same chain: the loss gradient at each output pixel is
pushed through a per-pixel spatial gradient (fitted for the linearized
sampler, analytic bilinear-kernel derivatives for the baselines) and then
through the Jacobian of the transformed center coordinate. Intensities act
as constants; only the coordinates carry gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Image, bilinear_lookup_grad, pixel_center_grid
from .sampler import LinearizationGrid
from .transform import AffineParams, apply_grid, jacobian_grid


@dataclass(frozen=True)
class LossGrad:
    loss: float
    grad_theta: np.ndarray  # (5,) d loss / d (tx, ty, rot, log_sx, log_sy)


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Image) else np.asarray(x, dtype=np.float64)


def l2_loss(output, target) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to the output image."""
    out = _data(output)
    tgt = _data(target)
    if out.shape != tgt.shape:
        raise ValueError(f"shape mismatch: output {out.shape} vs target {tgt.shape}")
    diff = out - tgt
    n = diff.size
    loss = float(np.einsum("hwc,hwc->", diff, diff) / n)
    return loss, 2.0 * diff / n


def backprop_theta(grid: LinearizationGrid, grad_output: np.ndarray,
                   params: AffineParams) -> np.ndarray:
    """Pull an output-image gradient back to the five parameters.

    Uses the fitted spatial gradients (rows 0..1 of each pixel's model) as
    constants: grad_theta = sum_i J_i^T (A_spatial,i^T g_i). Invalid pixels
    have zero models and drop out.
    """
    h, w = grid.shape
    if grad_output.shape != grid.center_intensity.shape:
        raise ValueError("grad_output shape does not match the sampled grid")
    jac = jacobian_grid(params, pixel_center_grid(h, w))
    g_coord = np.einsum("hwac,hwc->hwa", grid.a[:, :, :2, :], grad_output)
    return np.einsum("hwap,hwa->p", jac, g_coord)


def lookup_theta_grad(level_data: list[np.ndarray], params: AffineParams,
                      grad_output: np.ndarray) -> np.ndarray:
    """Baseline backward: bilinear-kernel derivatives averaged over levels.

    level_data holds one array per blur level ((H,W,C) each); a single-entry
    list is the plain bilinear sampler.
    """
    out_h, out_w = grad_output.shape[:2]
    coords = apply_grid(params, pixel_center_grid(out_h, out_w))
    acc = None
    for data in level_data:
        _, g, _ = bilinear_lookup_grad(data, coords)
        acc = g if acc is None else acc + g
    acc /= len(level_data)
    jac = jacobian_grid(params, pixel_center_grid(out_h, out_w))
    g_coord = np.einsum("hwac,hwc->hwa", acc, grad_output)
    return np.einsum("hwap,hwa->p", jac, g_coord)


def frozen_model_loss(grid: LinearizationGrid, params: AffineParams, target,
                      include_bias: bool = True) -> float:
    """Loss of the frozen per-pixel linear models evaluated at new params.

    Each pixel predicts center_intensity + A_spatial (T(x) - coord_at_fit)
    (+ bias). This is the function the backward pass differentiates, so
    finite differences of it are the oracle for grad_theta.
    """
    h, w = grid.shape
    t = apply_grid(params, pixel_center_grid(h, w))
    delta = t - grid.center_coord
    out = grid.center_intensity + np.einsum("hwac,hwa->hwc", grid.a[:, :, :2, :], delta)
    if include_bias:
        out = out + grid.a[:, :, 2, :]
    loss, _ = l2_loss(out, target)
    return loss


def fd_loss_grad(loss_fn, params: AffineParams, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn over the five parameters."""
    base = params.as_vector()
    grad = np.zeros(5)
    for i in range(5):
        hi = base.copy()
        lo = base.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (loss_fn(AffineParams.from_vector(hi))
                   - loss_fn(AffineParams.from_vector(lo))) / (2.0 * step)
    return grad
