"""Differentiable image warping with linearized multi-sampling."""

from .autograd import LossGrad, backprop_theta, fd_loss_grad, frozen_model_loss, l2_loss
from .harness import (AlignmentReport, ExperimentPlan, OptimizerConfig,
                      SamplerChoice, SpecError, TrialSpec, gradient_field,
                      make_alignment_pair, optimize_alignment, recall_curve,
                      run_experiment, sample_perturbation)
from .raster import Image, ImageFormatError, NormCoord, bilinear_at, gaussian_blur, load_image, save_image
from .sampler import (LinearizationConfig, LinearizationGrid, PixelLinearization,
                      SampledOutput, fit_linearization, sample_bilinear,
                      sample_linearized, sample_multiscale)
from .textures import generate_texture, plane_image
from .transform import AffineParams, apply, corner_reprojection_error, jacobian

__all__ = [
    "AffineParams", "AlignmentReport", "ExperimentPlan", "Image",
    "ImageFormatError", "LinearizationConfig", "LinearizationGrid", "LossGrad",
    "NormCoord", "OptimizerConfig", "PixelLinearization", "SampledOutput",
    "SamplerChoice", "SpecError", "TrialSpec", "apply", "backprop_theta",
    "bilinear_at", "corner_reprojection_error", "fd_loss_grad",
    "fit_linearization", "frozen_model_loss", "gaussian_blur",
    "generate_texture", "gradient_field", "jacobian", "l2_loss", "load_image",
    "make_alignment_pair", "optimize_alignment", "plane_image", "recall_curve",
    "run_experiment", "sample_bilinear", "sample_linearized",
    "sample_multiscale", "sample_perturbation", "save_image",
]
