"""Command-line entry points for alignment runs, benchmarks, and ablations."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .harness import (SAMPLER_KINDS, ExperimentPlan, LinearizationConfig,
                      OptimizerConfig, SamplerChoice, SpecError,
                      collapse_ablation_plan, gradient_field, k_ablation_plan,
                      load_experiment_spec, make_alignment_pair,
                      optimize_alignment, output_shape, resolve_image,
                      run_experiment, sample_perturbation, sigma_ablation_plan,
                      time_samplers, write_gradfield_csv, write_recall_csv,
                      write_trial_csv)
from .raster import ImageFormatError, save_image
from .textures import generate_texture
from .transform import AffineParams


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


def _size(text: str) -> tuple[int, int]:
    h, w = text.lower().split("x")
    return int(h), int(w)


def _add_sampler_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sampler", choices=SAMPLER_KINDS, default="linearized")
    p.add_argument("--k", type=int, default=8, help="samples per pixel incl. center")
    p.add_argument("--sigma", type=_floats, default=None,
                   help="explicit sigma_u,sigma_v in normalized units")
    p.add_argument("--sigma-scale", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--no-collapse-prevention", action="store_true")
    p.add_argument("--no-bias", action="store_true")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--stds", type=_floats, default=(1.0, 5.0, 10.0),
                   help="blur stds for the multiscale sampler")


def _choice_from_args(args) -> SamplerChoice:
    sigma = None
    if args.sigma is not None:
        if len(args.sigma) != 2:
            raise SpecError("--sigma needs exactly two values")
        sigma = (args.sigma[0], args.sigma[1])
    cfg = LinearizationConfig(
        k=args.k, sigma=sigma, sigma_scale=args.sigma_scale, epsilon=args.epsilon,
        collapse_prevention=not args.no_collapse_prevention,
        include_bias=not args.no_bias, seed=args.sample_seed)
    return SamplerChoice(kind=args.sampler, config=cfg, stds=tuple(args.stds))


def _add_optimizer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("adam", "gd"), default="adam")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--stop-tol", type=float, default=1e-9)


def _opt_from_args(args) -> OptimizerConfig:
    return OptimizerConfig(method=args.method, learning_rate=args.lr,
                           max_iters=args.max_iters, stop_tol=args.stop_tol)


def _print_rows(rows: list[dict], keys: tuple[str, ...]) -> None:
    for row in rows:
        print("  " + "  ".join(f"{k}={row[k]}" for k in keys))


def _recall_at(rows: list[dict], sampler: str, threshold: float) -> float:
    errs = [r["final_error_px"] for r in rows if r["sampler"] == sampler]
    return sum(1 for e in errs if e <= threshold) / len(errs)


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_align(args) -> int:
    src = resolve_image(args.image)
    out_h, out_w = output_shape(src.height, src.width, args.factor)
    base = args.base_log_scale
    if args.gt is not None:
        if len(args.gt) != 5:
            raise SpecError("--gt needs tx,ty,rot,log_sx,log_sy")
        gt = AffineParams(*args.gt)
    else:
        pert = sample_perturbation(args.perturb_seed, args.perturb_scale)
        gt = AffineParams(pert.tx, pert.ty, pert.rot,
                          pert.log_sx + base, pert.log_sy + base)
    target = make_alignment_pair(src, gt, out_h, out_w)
    init = AffineParams(0.0, 0.0, 0.0, base, base)
    choice = _choice_from_args(args)
    report = optimize_alignment(src, target, init, choice, _opt_from_args(args),
                                seed=args.seed, gt_params=gt)
    print(f"# sampler={choice.name} out={out_h}x{out_w} gt={gt.to_csv()}")
    for it, loss, params in report.trajectory:
        if it % args.print_every == 0:
            print(f"iter={it:5d} loss={loss:.6e} params={params.to_csv()}")
    status = "aborted" if report.aborted else (
        "converged" if report.converged else "max-iters")
    print(f"final params={report.final_params.to_csv()} loss={report.final_loss:.6e} "
          f"error_px={report.final_error_px:.4f} iters={report.iterations} [{status}]")
    if report.abort_reason:
        print(f"abort: {report.abort_reason}")
    return 0


def _run_and_write(plan: ExperimentPlan, out_dir: Path, jobs: int,
                   prefix: str = "trials") -> list[dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(plan, jobs=jobs)
    trial_path = out_dir / f"{prefix}.csv"
    recall_path = out_dir / "recall.csv"
    write_trial_csv(rows, trial_path)
    write_recall_csv(rows, recall_path)
    print(f"wrote {len(rows)} trial rows to {trial_path}")
    print(f"wrote recall curves to {recall_path}")
    return rows


def _cmd_bench(args) -> int:
    plan = load_experiment_spec(args.spec)
    rows = _run_and_write(plan, Path(args.out_dir), args.jobs)
    aborted = sum(1 for r in rows if r["aborted"])
    unconverged = sum(1 for r in rows if not r["converged"])
    print(f"trials: {len(rows)}  unconverged: {unconverged}  aborted: {aborted}")
    print("timing (median ms per call):")
    _print_rows(time_samplers(plan), ("sampler", "forward_ms", "forward_backward_ms"))
    return 0


def _cmd_gradfield(args) -> int:
    src = resolve_image(args.image)
    out_h, out_w = output_shape(src.height, src.width, args.factor)
    target = make_alignment_pair(src, AffineParams(), out_h, out_w)
    ticks = np.linspace(-args.extent, args.extent, args.steps)
    offsets = [(tx, ty) for ty in ticks for tx in ticks]
    field = gradient_field(src, target, _choice_from_args(args), offsets)
    write_gradfield_csv(field, args.out)
    print(f"wrote {len(field)} gradient-field rows to {args.out}")
    return 0


def _cmd_ablate_k(args) -> int:
    plan = k_ablation_plan(ks=args.ks, factor=args.factor, trials=args.trials,
                           master_seed=args.master_seed, size=args.size,
                           perturb_scale=args.perturb_scale,
                           max_iters=args.max_iters)
    rows = _run_and_write(plan, Path(args.out_dir), args.jobs)
    for choice in plan.samplers:
        errs = [r["final_error_px"] for r in rows if r["sampler"] == choice.name]
        print(f"{choice.name}: mean_error_px={np.mean(errs):.4f}")
    return 0


def _cmd_ablate_sigma(args) -> int:
    plan = sigma_ablation_plan(scales=args.scales, factor=args.factor,
                               trials=args.trials, master_seed=args.master_seed,
                               size=args.size, perturb_scale=args.perturb_scale,
                               max_iters=args.max_iters)
    rows = _run_and_write(plan, Path(args.out_dir), args.jobs)
    for choice in plan.samplers:
        loose = _recall_at(rows, choice.name, 20.0)
        tight = _recall_at(rows, choice.name, 1.0)
        print(f"{choice.name}: recall@20px={loose:.3f} recall@1px={tight:.3f}")
    return 0


def _cmd_ablate_collapse(args) -> int:
    plan = collapse_ablation_plan(zoom=args.zoom, trials=args.trials,
                                  master_seed=args.master_seed, size=args.size,
                                  perturb_scale=args.perturb_scale,
                                  max_iters=args.max_iters)
    rows = _run_and_write(plan, Path(args.out_dir), args.jobs)
    for choice in plan.samplers:
        recall = _recall_at(rows, choice.name, 10.0)
        aborts = sum(1 for r in rows
                     if r["sampler"] == choice.name and r["aborted"])
        print(f"{choice.name}: recall@10px={recall:.3f} aborts={aborts}")
    return 0


def _cmd_gen_texture(args) -> int:
    h, w = args.size
    img = generate_texture(args.seed, h, w, channels=args.channels)
    save_image(img, args.out)
    print(f"wrote {h}x{w}x{args.channels} texture to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linwarp",
        description="Differentiable image warping and alignment benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="run one alignment trial, print trajectory")
    p.add_argument("--image", required=True,
                   help="image path or texture:<seed>:<HxW>[:<channels>]")
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--gt", type=_floats, default=None,
                   help="ground-truth params tx,ty,rot,log_sx,log_sy")
    p.add_argument("--perturb-seed", type=int, default=0)
    p.add_argument("--perturb-scale", type=float, default=0.5)
    p.add_argument("--base-log-scale", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="optimizer noise seed")
    p.add_argument("--print-every", type=int, default=25)
    _add_sampler_args(p)
    _add_optimizer_args(p)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("bench", help="run a trial matrix from a JSON spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gradfield", help="negative-gradient field over translations")
    p.add_argument("--image", required=True)
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--extent", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--out", required=True)
    _add_sampler_args(p)
    p.set_defaults(func=_cmd_gradfield)

    def add_ablation_common(p, master_seed, perturb_scale=0.5, max_iters=400):
        p.add_argument("--out-dir", required=True)
        p.add_argument("--trials", type=int, default=40)
        p.add_argument("--master-seed", type=int, default=master_seed)
        p.add_argument("--size", type=int, default=64)
        p.add_argument("--perturb-scale", type=float, default=perturb_scale)
        p.add_argument("--max-iters", type=int, default=max_iters)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("ablate-k", help="sample-count ablation")
    p.add_argument("--ks", type=_ints, default=(4, 8, 16))
    p.add_argument("--factor", type=float, default=4.0)
    add_ablation_common(p, master_seed=8)
    p.set_defaults(func=_cmd_ablate_k)

    p = sub.add_parser("ablate-sigma", help="auxiliary-noise-size ablation")
    p.add_argument("--scales", type=_floats, default=(1.0, 3.0, 6.0))
    p.add_argument("--factor", type=float, default=2.0)
    add_ablation_common(p, master_seed=15)
    p.set_defaults(func=_cmd_ablate_sigma)

    p = sub.add_parser("ablate-collapse", help="collapse-prevention ablation under zoom")
    p.add_argument("--zoom", type=float, default=4.0)
    add_ablation_common(p, master_seed=13)
    p.set_defaults(func=_cmd_ablate_collapse)

    p = sub.add_parser("gen-texture", help="write a seeded synthetic texture")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=_size, default=(96, 96))
    p.add_argument("--channels", type=int, default=1, choices=(1, 3))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_texture)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
