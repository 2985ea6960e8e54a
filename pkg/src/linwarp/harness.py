"""Alignment optimizer, experiment harness, and CSV artifact emission.

An experiment is a trial matrix (samplers x downsample factors x trial ids)
driven by one master seed. Every random quantity a trial needs (texture,
ground-truth perturbation, sampling noise) is derived from (master_seed,
trial_id) with fixed tags, so trials are independent, parallelizable, and
paired across samplers: the same trial_id sees the same image and the same
ground truth no matter which sampler is optimizing.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .autograd import LossGrad, backprop_theta, l2_loss, lookup_theta_grad
from .raster import Image, gaussian_blur, load_image
from .rng import GaussianStream, derive_seed
from .sampler import (LinearizationConfig, SampledOutput, _sample_levels,
                      sample_bilinear, sample_linearized)
from .textures import generate_texture
from .transform import AffineParams, corner_reprojection_error

SAMPLER_KINDS = ("bilinear", "multiscale", "linearized")

# substream tags for per-trial seed derivation
_TAG_IMAGE = 0x11
_TAG_PERTURB = 0x22
_TAG_NOISE = 0x33

# std devs of the random alignment perturbations, in parameter order
PERTURB_STDS = (0.2, 0.2, math.pi / 4.0, math.sqrt(2.0), math.sqrt(2.0))


class SpecError(ValueError):
    """Raised for malformed experiment spec files (before any trial runs)."""


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adam"
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_iters: int = 1000
    stop_tol: float = 1e-9

    def __post_init__(self):
        if self.method not in ("gd", "adam"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be >= 0")


@dataclass(frozen=True)
class SamplerChoice:
    """A sampler under test: kind plus whichever options that kind uses."""

    kind: str = "linearized"
    config: LinearizationConfig = LinearizationConfig()
    stds: tuple[float, ...] = (1.0, 5.0, 10.0)
    label: str | None = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")

    @property
    def name(self) -> str:
        return self.label if self.label is not None else self.kind


@dataclass(frozen=True)
class TrialSpec:
    image_ref: str
    out_h: int
    out_w: int
    downsample_factor: float
    perturbation_seed: int
    sampler: SamplerChoice

    def __post_init__(self):
        if self.downsample_factor < 1.0:
            raise ValueError("downsample_factor must be >= 1")


@dataclass
class AlignmentReport:
    trial: TrialSpec | None
    gt_params: AffineParams | None
    trajectory: list  # (iteration, loss, AffineParams) per evaluated iterate
    final_params: AffineParams
    final_loss: float
    iterations: int
    converged: bool
    aborted: bool = False
    abort_reason: str | None = None
    final_error_px: float = float("nan")


class WarpModel:
    """Forward + parameter gradient for one (source, output shape, sampler).

    Blur pyramids are built once here so the per-iteration cost of the
    multiscale baseline is lookups only.
    """

    def __init__(self, src: Image, out_h: int, out_w: int, choice: SamplerChoice):
        self.src = src
        self.out_h = out_h
        self.out_w = out_w
        self.choice = choice
        if choice.kind == "multiscale":
            self._levels = [gaussian_blur(src, s).data for s in choice.stds]
        elif choice.kind == "bilinear":
            self._levels = [src.data]
        else:
            self._levels = None

    def forward(self, params: AffineParams, noise_seed: int | None = None) -> SampledOutput:
        if self.choice.kind == "linearized":
            rng = GaussianStream(self.choice.config.seed if noise_seed is None else noise_seed)
            return sample_linearized(self.src, params, self.out_h, self.out_w,
                                     self.choice.config, rng)
        return _sample_levels(self._levels, params, self.out_h, self.out_w)

    def loss_grad(self, params: AffineParams, target: Image,
                  noise_seed: int | None = None) -> LossGrad:
        out = self.forward(params, noise_seed)
        loss, g = l2_loss(out.image, target)
        if self.choice.kind == "linearized":
            grad = backprop_theta(out.linearizations, g, params)
        else:
            grad = lookup_theta_grad(self._levels, params, g)
        return LossGrad(loss, grad)


# ---------------------------------------------------------------------------
# Trial construction

def sample_perturbation(rng, scale: float = 1.0) -> AffineParams:
    """Random alignment offset: independent zero-mean normals per parameter.

    Stds (0.2, 0.2, pi/4, sqrt2, sqrt2) for (tx, ty, rot, log_sx, log_sy) on
    [-1,1]-normalized coordinates; scale shrinks all of them together.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    vals = [float(rng.normal(0.0, s * scale)) for s in PERTURB_STDS]
    return AffineParams(*vals)


def output_shape(src_h: int, src_w: int, factor: float) -> tuple[int, int]:
    if factor < 1.0:
        raise ValueError("downsample_factor must be >= 1")
    out_h = int(src_h // factor)
    out_w = int(src_w // factor)
    if out_h < 2 or out_w < 2:
        raise ValueError(f"degenerate output size {out_h}x{out_w} (need >= 2 px per side)")
    return out_h, out_w


def make_alignment_pair(src: Image, gt_params: AffineParams,
                        out_h: int, out_w: int) -> Image:
    """Ground-truth target: always a plain bilinear warp of the source."""
    if out_h < 2 or out_w < 2:
        raise ValueError("degenerate output size (need >= 2 px per side)")
    return sample_bilinear(src, gt_params, out_h, out_w).image


def resolve_image(ref: str) -> Image:
    """Load a trial image: a file path or 'texture:<seed>:<HxW>[:<channels>]'."""
    if ref.startswith("texture:"):
        parts = ref.split(":")
        if len(parts) not in (3, 4):
            raise SpecError(f"bad texture ref {ref!r}")
        try:
            seed = int(parts[1])
            h, w = (int(t) for t in parts[2].split("x"))
            channels = int(parts[3]) if len(parts) == 4 else 1
        except ValueError as exc:
            raise SpecError(f"bad texture ref {ref!r}") from exc
        return generate_texture(seed, h, w, channels)
    return load_image(ref)


# ---------------------------------------------------------------------------
# Optimizer

_PLATEAU_RUN = 20  # consecutive small loss deltas before declaring convergence


def optimize_alignment(src: Image, target: Image, init: AffineParams,
                       choice: SamplerChoice, opt: OptimizerConfig = OptimizerConfig(),
                       seed: int = 0, gt_params: AffineParams | None = None,
                       trial: TrialSpec | None = None) -> AlignmentReport:
    """First-order alignment of src to target over the five parameters.

    Sampling noise is re-drawn each iteration from (seed, iteration). The
    reported final_params is the best-loss iterate seen, not the last one.
    A non-finite loss or gradient aborts the trial (converged=False) with a
    diagnostic instead of raising: divergence is data for the harness.
    """
    if target.channels != src.channels:
        raise ValueError("source/target channel mismatch")
    model = WarpModel(src, target.height, target.width, choice)
    theta = init.as_vector()
    m = np.zeros(5)
    v = np.zeros(5)
    trajectory: list = []
    best_loss = math.inf
    best_theta = theta.copy()
    prev_loss = None
    plateau = 0
    converged = False
    aborted = False
    abort_reason = None

    for it in range(opt.max_iters):
        try:
            lg = model.loss_grad(AffineParams.from_vector(theta), target,
                                 derive_seed(seed, it))
        except OverflowError:  # exp() past the float64 range: divergence
            aborted = True
            abort_reason = f"parameter overflow at iteration {it}"
            break
        if not (math.isfinite(lg.loss) and np.all(np.isfinite(lg.grad_theta))):
            aborted = True
            abort_reason = f"non-finite loss or gradient at iteration {it}"
            break
        trajectory.append((it, lg.loss, AffineParams.from_vector(theta)))
        if lg.loss < best_loss:
            best_loss = lg.loss
            best_theta = theta.copy()
        if prev_loss is not None and abs(lg.loss - prev_loss) < opt.stop_tol:
            plateau += 1
            if plateau >= _PLATEAU_RUN:
                converged = True
                break
        else:
            plateau = 0
        prev_loss = lg.loss
        g = lg.grad_theta
        if opt.method == "adam":
            t = it + 1
            m = opt.adam_beta1 * m + (1.0 - opt.adam_beta1) * g
            v = opt.adam_beta2 * v + (1.0 - opt.adam_beta2) * g * g
            m_hat = m / (1.0 - opt.adam_beta1 ** t)
            v_hat = v / (1.0 - opt.adam_beta2 ** t)
            theta = theta - opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.adam_eps)
        else:
            theta = theta - opt.learning_rate * g

    if not trajectory:  # aborted on the very first evaluation
        trajectory.append((0, math.inf, init))
    final = AffineParams.from_vector(best_theta)
    error_px = float("nan")
    if gt_params is not None:
        try:
            error_px = corner_reprojection_error(final, gt_params,
                                                 target.height, target.width,
                                                 src.height, src.width)
        except OverflowError:  # diverged past exp() range: no meaningful error
            pass
    return AlignmentReport(trial=trial, gt_params=gt_params, trajectory=trajectory,
                           final_params=final, final_loss=best_loss,
                           iterations=len(trajectory), converged=converged,
                           aborted=aborted, abort_reason=abort_reason,
                           final_error_px=error_px)


# ---------------------------------------------------------------------------
# Aggregation

def default_recall_thresholds() -> np.ndarray:
    return np.logspace(np.log10(0.1), np.log10(100.0), 64)


def recall_curve(reports, thresholds) -> list[tuple[float, float]]:
    """Fraction of trials with final corner error <= t for each threshold.

    Accepts AlignmentReports or bare error values; NaN errors (aborted
    trials) never count as recalled.
    """
    errors = [r.final_error_px if isinstance(r, AlignmentReport) else float(r)
              for r in reports]
    if not errors:
        raise ValueError("recall_curve needs at least one trial")
    n = len(errors)
    return [(float(t), sum(1 for e in errors if e <= t) / n) for t in thresholds]


def gradient_field(src: Image, target: Image, choice: SamplerChoice,
                   offsets, base_params: AffineParams = AffineParams(),
                   noise_seed: int | None = None):
    """Negative loss gradient over (tx, ty) at each translation offset."""
    model = WarpModel(src, target.height, target.width, choice)
    rows = []
    for otx, oty in offsets:
        p = replace(base_params, tx=base_params.tx + float(otx),
                    ty=base_params.ty + float(oty))
        lg = model.loss_grad(p, target, noise_seed)
        rows.append(((float(otx), float(oty)),
                     (-float(lg.grad_theta[0]), -float(lg.grad_theta[1]))))
    return rows


# ---------------------------------------------------------------------------
# Experiment plans

@dataclass(frozen=True)
class ExperimentPlan:
    master_seed: int
    trials: int
    samplers: tuple[SamplerChoice, ...]
    factors: tuple[float, ...]
    images: tuple[str, ...] | None   # explicit refs; None -> generated textures
    texture_shape: tuple[int, int, int]  # (h, w, channels) for generated textures
    optimizer: OptimizerConfig = OptimizerConfig()
    perturb_scale: float = 1.0
    base_log_scale: float = 0.0

    def image_ref(self, trial_id: int) -> str:
        if self.images is not None:
            return self.images[trial_id % len(self.images)]
        h, w, c = self.texture_shape
        tex_seed = derive_seed(self.master_seed, trial_id, _TAG_IMAGE)
        return f"texture:{tex_seed}:{h}x{w}:{c}"


def trial_seed(plan: ExperimentPlan, trial_id: int) -> int:
    return derive_seed(plan.master_seed, trial_id)


def run_planned_trial(plan: ExperimentPlan, choice: SamplerChoice, factor: float,
                      trial_id: int) -> dict:
    """One trial of the matrix, fully determined by (plan, choice, factor, id)."""
    ref = plan.image_ref(trial_id)
    src = resolve_image(ref)
    out_h, out_w = output_shape(src.height, src.width, factor)
    tseed = trial_seed(plan, trial_id)
    pert = sample_perturbation(derive_seed(tseed, _TAG_PERTURB), plan.perturb_scale)
    base = plan.base_log_scale
    gt = AffineParams(pert.tx, pert.ty, pert.rot,
                      pert.log_sx + base, pert.log_sy + base)
    target = make_alignment_pair(src, gt, out_h, out_w)
    init = AffineParams(0.0, 0.0, 0.0, base, base)
    trial = TrialSpec(image_ref=ref, out_h=out_h, out_w=out_w,
                      downsample_factor=float(factor), perturbation_seed=tseed,
                      sampler=choice)
    report = optimize_alignment(src, target, init, choice, plan.optimizer,
                                seed=derive_seed(tseed, _TAG_NOISE),
                                gt_params=gt, trial=trial)
    fp = report.final_params
    return {
        "trial_id": trial_id,
        "sampler": choice.name,
        "downsample_factor": float(factor),
        "seed": tseed,
        "gt_tx": gt.tx, "gt_ty": gt.ty, "gt_rot": gt.rot,
        "gt_log_sx": gt.log_sx, "gt_log_sy": gt.log_sy,
        "final_tx": fp.tx, "final_ty": fp.ty, "final_rot": fp.rot,
        "final_log_sx": fp.log_sx, "final_log_sy": fp.log_sy,
        "iterations": report.iterations,
        "final_loss": report.final_loss,
        "final_error_px": report.final_error_px,
        "converged": report.converged,
        "aborted": report.aborted,
    }


def _run_job(args):
    plan, sampler_idx, factor, trial_id = args
    return run_planned_trial(plan, plan.samplers[sampler_idx], factor, trial_id)


def run_experiment(plan: ExperimentPlan, jobs: int = 1) -> list[dict]:
    """Run the full trial matrix; rows come back sorted and deterministic."""
    args = [(plan, si, factor, t)
            for si in range(len(plan.samplers))
            for factor in plan.factors
            for t in range(plan.trials)]
    if jobs > 1:
        with get_context("fork").Pool(jobs) as pool:
            rows = pool.map(_run_job, args)
    else:
        rows = [_run_job(a) for a in args]
    rows.sort(key=lambda r: (r["sampler"], r["downsample_factor"], r["trial_id"]))
    return rows


TRIAL_CSV_COLUMNS = (
    "trial_id", "sampler", "downsample_factor", "seed",
    "gt_tx", "gt_ty", "gt_rot", "gt_log_sx", "gt_log_sy",
    "final_tx", "final_ty", "final_rot", "final_log_sx", "final_log_sy",
    "iterations", "final_loss", "final_error_px", "converged",
)

RECALL_CSV_COLUMNS = ("sampler", "downsample_factor", "threshold_px", "recall")

GRADFIELD_CSV_COLUMNS = ("offset_tx", "offset_ty", "neg_grad_tx", "neg_grad_ty")


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):  # includes np.float64; plain repr() round-trips
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(row[c]) for c in columns])


def write_trial_csv(rows: list[dict], path) -> None:
    _write_csv(path, TRIAL_CSV_COLUMNS, rows)


def aggregate_recall(rows: list[dict], thresholds=None) -> list[dict]:
    """Recall rows per (sampler, factor) over the trial rows."""
    if thresholds is None:
        thresholds = default_recall_thresholds()
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row["sampler"], row["downsample_factor"]), []).append(
            row["final_error_px"])
    out = []
    for (sampler, factor) in sorted(groups):
        for t, r in recall_curve(groups[(sampler, factor)], thresholds):
            out.append({"sampler": sampler, "downsample_factor": factor,
                        "threshold_px": t, "recall": r})
    return out


def write_recall_csv(rows: list[dict], path, thresholds=None) -> None:
    _write_csv(path, RECALL_CSV_COLUMNS, aggregate_recall(rows, thresholds))


def write_gradfield_csv(field_rows, path) -> None:
    rows = [{"offset_tx": o[0], "offset_ty": o[1],
             "neg_grad_tx": g[0], "neg_grad_ty": g[1]} for o, g in field_rows]
    _write_csv(path, GRADFIELD_CSV_COLUMNS, rows)


# ---------------------------------------------------------------------------
# Spec files

def _parse_sampler_entry(entry: dict, defaults: LinearizationConfig) -> SamplerChoice:
    if not isinstance(entry, dict) or "kind" not in entry:
        raise SpecError("each sampler entry must be an object with a 'kind'")
    kind = entry["kind"]
    if kind not in SAMPLER_KINDS:
        raise SpecError(f"unknown sampler kind {kind!r}")
    known = {"kind", "label", "stds", "k", "sigma", "sigma_scale", "epsilon",
             "collapse_prevention", "include_bias", "seed"}
    extra = set(entry) - known
    if extra:
        raise SpecError(f"unknown sampler fields: {sorted(extra)}")
    label = entry.get("label")
    stds = tuple(float(s) for s in entry.get("stds", (1.0, 5.0, 10.0)))
    cfg_fields = {}
    for key in ("k", "sigma_scale", "epsilon", "collapse_prevention",
                "include_bias", "seed"):
        if key in entry:
            cfg_fields[key] = entry[key]
    if "sigma" in entry and entry["sigma"] is not None:
        sig = entry["sigma"]
        if not (isinstance(sig, (list, tuple)) and len(sig) == 2):
            raise SpecError("sigma must be a [sigma_u, sigma_v] pair")
        cfg_fields["sigma"] = (float(sig[0]), float(sig[1]))
    try:
        config = replace(defaults, **cfg_fields)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"bad sampler config: {exc}") from exc
    return SamplerChoice(kind=kind, config=config, stds=stds, label=label)


def parse_experiment_spec(spec: dict, base_dir: Path | None = None) -> ExperimentPlan:
    """Validate a spec mapping and build the plan; all errors raised up front."""
    if not isinstance(spec, dict):
        raise SpecError("experiment spec must be a JSON object")
    known = {"master_seed", "trials", "downsample_factors", "samplers", "images",
             "texture", "optimizer", "linearization", "perturb_scale",
             "base_log_scale"}
    extra = set(spec) - known
    if extra:
        raise SpecError(f"unknown spec fields: {sorted(extra)}")
    for field_name in ("master_seed", "trials", "downsample_factors", "samplers"):
        if field_name not in spec:
            raise SpecError(f"missing required spec field {field_name!r}")
    try:
        master_seed = int(spec["master_seed"])
        trials = int(spec["trials"])
    except (TypeError, ValueError) as exc:
        raise SpecError("master_seed and trials must be integers") from exc
    if trials < 1:
        raise SpecError("trials must be >= 1")
    factors = tuple(float(f) for f in spec["downsample_factors"])
    if not factors:
        raise SpecError("downsample_factors must be non-empty")
    if any(f < 1.0 for f in factors):
        raise SpecError("downsample factors must be >= 1")

    lin_defaults = LinearizationConfig()
    if "linearization" in spec:
        fields = dict(spec["linearization"])
        if fields.get("sigma") is not None:
            fields["sigma"] = (float(fields["sigma"][0]), float(fields["sigma"][1]))
        try:
            lin_defaults = replace(lin_defaults, **fields)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad linearization defaults: {exc}") from exc

    samplers = tuple(_parse_sampler_entry(e, lin_defaults) for e in spec["samplers"])
    if not samplers:
        raise SpecError("samplers must be non-empty")
    labels = [c.name for c in samplers]
    if len(set(labels)) != len(labels):
        raise SpecError(f"sampler labels must be unique, got {labels}")

    if ("images" in spec) == ("texture" in spec):
        raise SpecError("spec needs exactly one of 'images' or 'texture'")
    images = None
    texture_shape = (96, 96, 1)
    if "images" in spec:
        refs = spec["images"]
        if not refs:
            raise SpecError("images must be non-empty")
        resolved = []
        for ref in refs:
            if ref.startswith("texture:"):
                resolved.append(ref)
                continue
            p = Path(ref)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            if not p.is_file():
                raise SpecError(f"image file not found: {p}")
            resolved.append(str(p))
        images = tuple(resolved)
    else:
        tex = spec["texture"]
        if not isinstance(tex, dict):
            raise SpecError("texture must be an object with height/width")
        texture_shape = (int(tex.get("height", 96)), int(tex.get("width", 96)),
                         int(tex.get("channels", 1)))

    opt = OptimizerConfig()
    if "optimizer" in spec:
        try:
            opt = replace(opt, **spec["optimizer"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad optimizer config: {exc}") from exc

    return ExperimentPlan(
        master_seed=master_seed, trials=trials, samplers=samplers,
        factors=factors, images=images, texture_shape=texture_shape,
        optimizer=opt, perturb_scale=float(spec.get("perturb_scale", 1.0)),
        base_log_scale=float(spec.get("base_log_scale", 0.0)))


def load_experiment_spec(path) -> ExperimentPlan:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except OSError as exc:
        raise SpecError(f"cannot read spec file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file is not valid JSON: {exc}") from exc
    return parse_experiment_spec(spec, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Canned plans for the ablation experiments (also used by the CLI)

def _lin_choice(label: str, **cfg) -> SamplerChoice:
    return SamplerChoice(kind="linearized", config=LinearizationConfig(**cfg),
                         label=label)


def k_ablation_plan(ks=(4, 8, 16), factor: float = 4.0, trials: int = 40,
                    master_seed: int = 8, size: int = 64,
                    perturb_scale: float = 0.5, max_iters: int = 400) -> ExperimentPlan:
    samplers = tuple(_lin_choice(f"linearized-k{k}", k=k) for k in ks)
    return ExperimentPlan(
        master_seed=master_seed, trials=trials, samplers=samplers,
        factors=(float(factor),), images=None, texture_shape=(size, size, 1),
        optimizer=OptimizerConfig(max_iters=max_iters),
        perturb_scale=perturb_scale)


def sigma_ablation_plan(scales=(1.0, 3.0, 6.0), factor: float = 2.0,
                        trials: int = 40, master_seed: int = 15, size: int = 64,
                        perturb_scale: float = 0.5, max_iters: int = 400) -> ExperimentPlan:
    samplers = tuple(_lin_choice(f"linearized-sigma{s:g}", sigma_scale=s)
                     for s in scales)
    return ExperimentPlan(
        master_seed=master_seed, trials=trials, samplers=samplers,
        factors=(float(factor),), images=None, texture_shape=(size, size, 1),
        optimizer=OptimizerConfig(max_iters=max_iters),
        perturb_scale=perturb_scale)


def collapse_ablation_plan(zoom: float = 4.0, trials: int = 40,
                           master_seed: int = 13, size: int = 64,
                           perturb_scale: float = 0.5,
                           max_iters: int = 400) -> ExperimentPlan:
    """Upsampling stress test: optimize around a zoom-in anchor transform."""
    if zoom < 1.0:
        raise ValueError("zoom must be >= 1")
    samplers = (_lin_choice("collapse-prevention-on", collapse_prevention=True),
                _lin_choice("collapse-prevention-off", collapse_prevention=False))
    return ExperimentPlan(
        master_seed=master_seed, trials=trials, samplers=samplers,
        factors=(1.0,), images=None, texture_shape=(size, size, 1),
        optimizer=OptimizerConfig(max_iters=max_iters),
        perturb_scale=perturb_scale, base_log_scale=-math.log(zoom))


# ---------------------------------------------------------------------------
# Timing (stdout report only; never written into deterministic artifacts)

def time_samplers(plan: ExperimentPlan, repeats: int = 5) -> list[dict]:
    """Median forward / forward+backward wall time per sampler, in ms."""
    src = resolve_image(plan.image_ref(0))
    factor = plan.factors[0]
    out_h, out_w = output_shape(src.height, src.width, factor)
    tseed = trial_seed(plan, 0)
    pert = sample_perturbation(derive_seed(tseed, _TAG_PERTURB), plan.perturb_scale)
    gt = AffineParams(pert.tx, pert.ty, pert.rot,
                      pert.log_sx + plan.base_log_scale,
                      pert.log_sy + plan.base_log_scale)
    target = make_alignment_pair(src, gt, out_h, out_w)
    params = AffineParams(0.0, 0.0, 0.0, plan.base_log_scale, plan.base_log_scale)
    out = []
    for choice in plan.samplers:
        model = WarpModel(src, out_h, out_w, choice)
        model.loss_grad(params, target, 0)  # warm up caches/JIT-free but fair
        fwd, both = [], []
        for i in range(repeats):
            t0 = time.perf_counter()
            model.forward(params, i)
            t1 = time.perf_counter()
            model.loss_grad(params, target, i)
            t2 = time.perf_counter()
            fwd.append(t1 - t0)
            both.append(t2 - t1)
        out.append({"sampler": choice.name,
                    "forward_ms": 1e3 * sorted(fwd)[len(fwd) // 2],
                    "forward_backward_ms": 1e3 * sorted(both)[len(both) // 2]})
    return out
