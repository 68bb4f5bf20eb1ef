"""
quadflow - Command Line Interface

    python -m quadflow interpolate --in f-1.pnm f0.pnm f1.pnm f2.pnm --t 0.5 --out out/
    python -m quadflow synth --scene scenes/accelerating_blob.txt --targets 7 --out data/
    python -m quadflow metrics --ref gt.pnm --pred out/out_t0.5.pnm [--asfp --base f0.pnm]
    python -m quadflow flow estimate|reverse|filter ...
    python -m quadflow eval --scene scenes/accelerating_blob.txt --models quadratic,linear
    python -m quadflow upsample --in a.pnm b.pnm c.pnm --factor 8 --out seq/

Exit codes: 0 success, 1 runtime error (stage-labelled message on stderr),
2 usage or configuration error.
"""

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from common.logging import configure_logging, get_logger
from common.utils import evenly_spaced_times, format_time_tag, parallel_map, parse_time_list
from config import ConfigurationError, ConfigurationManager, QuadFlowConfig, validate_configuration
from .errors import MetricError, QuadFlowError, StorageError, stage
from .filtering import filter_flow
from .flowest import FlowProvider, estimate_flow
from .imgio import HoleMask, read_flo, read_image, read_mask, write_flo, write_image, write_mask
from .metrics import asfp_for_frames, compute_quality, trajectory_shift
from .reversal import reverse_flow
from .synthesis import interpolate_many, prepare_motion, synthesize, upsample_sequence
from .synthgen import load_scene, render_quartet_with_targets

logger = get_logger(__name__)

MODELS = ("quadratic", "linear")
# eval variants: settings each one applies on top of the configured pipeline
VARIANTS = {
    "quadratic": {"model": "quadratic"},
    "linear": {"model": "linear"},
    "no-reversal": {"model": "quadratic", "reversal": "naive"},
    "no-filter": {"model": "quadratic", "filtering": "off"},
}
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class EvalRecord(BaseModel):
    """One JSON-lines row of ``eval`` output"""
    model: str
    scope: str
    flows: str
    psnr: float
    ssim: Optional[float] = None
    ie: float
    asfp: Optional[float] = None


# =============================================================================
# Argument types
# =============================================================================
def _interior_times(text: str) -> List[float]:
    try:
        times = parse_time_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    for t in times:
        if not 0.0 < t < 1.0:
            raise argparse.ArgumentTypeError(f"t must lie in (0, 1), got {t:g}")
    return times


def _model_list(text: str) -> List[str]:
    models = [m.strip().lower() for m in text.split(",") if m.strip()]
    unknown = [m for m in models if m not in VARIANTS]
    if not models or unknown:
        raise argparse.ArgumentTypeError(f"models must be drawn from {', '.join(VARIANTS)}, got {text!r}")
    return models


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


# =============================================================================
# Parser
# =============================================================================
def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--log-level", dest="log_level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    parent.add_argument("--log-format", dest="log_format", default=None, choices=["console", "json"])
    parent.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default from QUADFLOW_THREADS)")
    return parent


def _flow_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--hs-levels", dest="hs_levels", type=int, default=None)
    parent.add_argument("--hs-alpha", dest="hs_alpha", type=float, default=None)
    parent.add_argument("--hs-iterations", dest="hs_iterations", type=int, default=None)
    return parent


def _reversal_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--sigma", type=float, default=None, help="splat Gaussian sigma (default 1)")
    parent.add_argument("--radius", type=int, default=None, help="splat radius (default 1)")
    return parent


def _variant_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--reversal", choices=["splat", "naive"], default=None,
                        help="splat the forward flows (default) or blend them per pixel")
    parent.add_argument("--filtering", choices=["medoid", "off"], default=None,
                        help="medoid-filter the backward flows (default) or use them as they are")
    return parent


def _filter_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--filter-radius", dest="filter_radius", type=int, default=None,
                        help="medoid support radius k_f (default 2)")
    parent.add_argument("--tau", dest="filter_threshold", type=float, default=None,
                        help="outlier threshold in px (default 2)")
    return parent


def _tracking_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--lk-levels", dest="lk_levels", type=int, default=None)
    parent.add_argument("--lk-window", dest="lk_window", type=int, default=None)
    parent.add_argument("--max-corners", dest="corner_max_points", type=int, default=None)
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    flow = _flow_flags()
    reversal = _reversal_flags()
    filtering = _filter_flags()
    tracking = _tracking_flags()
    pipeline = [common, flow, reversal, filtering, _variant_flags()]

    parser = argparse.ArgumentParser(prog="quadflow", description="Quadratic video frame interpolation")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    p = commands.add_parser("interpolate", parents=pipeline, help="synthesize frames between I_0 and I_1")
    p.add_argument("--in", dest="inputs", nargs=4, required=True, metavar=("F_M1", "F0", "F1", "F2"))
    p.add_argument("--t", dest="times", type=_interior_times, default=[0.5], help="comma-separated times in (0, 1)")
    p.add_argument("--model", choices=MODELS, default=None)
    p.add_argument("--flows", default=None, help="'estimate' or a template such as dir/flow_{src}to{dst}.flo")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_interpolate)

    p = commands.add_parser("synth", parents=[common], help="render a synthetic scene with ground truth")
    p.add_argument("--scene", required=True, type=Path)
    p.add_argument("--targets", type=_positive_int, default=7)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_synth)

    p = commands.add_parser("metrics", parents=[common, tracking], help="compare a prediction with ground truth")
    p.add_argument("--ref", required=True, type=Path)
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--asfp", action="store_true", help="also report feature-point shift (needs --base)")
    p.add_argument("--base", type=Path, default=None, help="the true I_0 for corner detection")
    p.set_defaults(handler=cmd_metrics)

    p = commands.add_parser("flow", help="standalone flow stages")
    actions = p.add_subparsers(dest="action", metavar="ACTION")
    actions.required = True

    a = actions.add_parser("estimate", parents=[common, flow], help="Horn-Schunck flow source -> target")
    a.add_argument("--source", required=True, type=Path)
    a.add_argument("--target", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.set_defaults(handler=cmd_flow_estimate)

    a = actions.add_parser("reverse", parents=[common, reversal], help="reverse a forward flow by splatting")
    a.add_argument("--in", dest="input", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--holes", type=Path, default=None, help="write the hole mask as PGM")
    a.set_defaults(handler=cmd_flow_reverse)

    a = actions.add_parser("filter", parents=[common, filtering], help="medoid spike removal and hole filling")
    a.add_argument("--in", dest="input", required=True, type=Path)
    a.add_argument("--holes", type=Path, default=None, help="PGM hole mask (255 = hole)")
    a.add_argument("--out", required=True, type=Path)
    a.set_defaults(handler=cmd_flow_filter)

    p = commands.add_parser("eval", parents=pipeline + [tracking], help="score models on a synthetic scene")
    p.add_argument("--scene", required=True, type=Path)
    p.add_argument("--models", type=_model_list, default=list(MODELS),
                   help="comma-separated from quadratic, linear, no-reversal, no-filter")
    p.add_argument("--flows", choices=["analytic", "estimate"], default="analytic",
                   help="feed ground-truth flows or estimate them (default analytic)")
    p.add_argument("--targets", type=_positive_int, default=7)
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("upsample", parents=pipeline, help="insert factor-1 frames between every pair")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--factor", type=_positive_int, default=8)
    p.add_argument("--model", choices=MODELS, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_upsample)

    return parser


def _settings_from_args(base: QuadFlowConfig, args: argparse.Namespace) -> QuadFlowConfig:
    fields = set(QuadFlowConfig.model_fields)
    overrides = {k: v for k, v in vars(args).items() if k in fields}
    # eval takes --flows as analytic|estimate, not a file template
    if args.command == "eval":
        overrides.pop("flows", None)
    return base.with_overrides(**overrides)


def _prepare_output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create output directory {path}: {e}") from e
    return path


# =============================================================================
# Commands
# =============================================================================
def cmd_interpolate(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("read-input"):
        frames = [read_image(p) for p in args.inputs]
    outputs = interpolate_many(frames, args.times, cfg)
    with stage("write-output"):
        out_dir = _prepare_output_dir(args.out)
        for t, image in zip(args.times, outputs):
            write_image(image, out_dir / f"out_t{format_time_tag(t)}.pnm")
    logger.info("interpolate finished", outputs=len(outputs), out=str(args.out))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("scene"):
        scene = load_scene(args.scene, cfg.supersample)
    times = evenly_spaced_times(args.targets)
    with stage("render"):
        rendered = render_quartet_with_targets(scene, times, cfg.threads)
    with stage("write-output"):
        out_dir = _prepare_output_dir(args.out)
        for index, frame in zip((-1, 0, 1, 2), rendered.frames):
            write_image(frame, out_dir / f"frame_{index}.pnm")
        for t, target in rendered.targets:
            write_image(target, out_dir / f"target_t{format_time_tag(t)}.pnm")
        for (src, dst), flow in rendered.gt_flows.by_pair().items():
            write_flo(flow, out_dir / f"flow_{src}to{dst}.flo")
    logger.info("synth finished", out=str(args.out), targets=len(times))
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    if args.asfp and args.base is None:
        print("quadflow metrics: error: --asfp requires --base", file=sys.stderr)
        return EXIT_USAGE
    with stage("read-input"):
        reference = read_image(args.ref)
        prediction = read_image(args.pred)
        base = read_image(args.base) if args.asfp else None
    with stage("metrics"):
        report = compute_quality(reference, prediction)
        if base is not None:
            shift = asfp_for_frames(base, reference, prediction,
                                    **cfg.stage_settings("corners"), **cfg.stage_settings("tracking"))
            report = report.model_copy(update={"asfp": shift})
    print(report.model_dump_json(exclude_none=True))
    return EXIT_OK


def cmd_flow_estimate(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("read-input"):
        source = read_image(args.source)
        target = read_image(args.target)
    with stage("flow"):
        flow = estimate_flow(source, target, **cfg.stage_settings("flow"))
    with stage("write-output"):
        write_flo(flow, args.out)
    return EXIT_OK


def cmd_flow_reverse(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("read-input"):
        forward = read_flo(args.input)
    with stage("reversal"):
        result = reverse_flow(forward, **cfg.stage_settings("reversal"))
    with stage("write-output"):
        write_flo(result.flow, args.out)
        if args.holes is not None:
            write_mask(result.holes, args.holes)
    logger.info("flow reversed", holes=result.holes.count, out=str(args.out))
    return EXIT_OK


def cmd_flow_filter(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("read-input"):
        flow = read_flo(args.input)
        holes = read_mask(args.holes) if args.holes is not None else HoleMask.empty(flow.height, flow.width)
    with stage("filter"):
        filtered = filter_flow(flow, holes, **cfg.stage_settings("filter"))
    with stage("write-output"):
        write_flo(filtered, args.out)
    return EXIT_OK


def _score(model: str, flows: str, scope: str, reports) -> EvalRecord:
    shifts = [r.asfp for r in reports if r.asfp is not None]
    ssims = [r.ssim for r in reports if r.ssim is not None]
    return EvalRecord(
        model=model,
        scope=scope,
        flows=flows,
        psnr=float(np.mean([r.psnr for r in reports])),
        ssim=float(np.mean(ssims)) if ssims else None,
        ie=float(np.mean([r.ie for r in reports])),
        asfp=float(np.mean(shifts)) if shifts else None,
    )


def _format_table(records: Sequence[EvalRecord]) -> str:
    header = f"{'model':<12} {'scope':<7} {'PSNR':>8} {'SSIM':>7} {'IE':>8} {'ASFP':>8}"
    lines = [header, "-" * len(header)]
    for r in records:
        shift = f"{r.asfp:8.3f}" if r.asfp is not None else f"{'n/a':>8}"
        ssim = f"{r.ssim:7.4f}" if r.ssim is not None else f"{'n/a':>7}"
        lines.append(f"{r.model:<12} {r.scope:<7} {r.psnr:8.3f} {ssim} {r.ie:8.3f} {shift}")
    return "\n".join(lines)


def cmd_eval(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    with stage("scene"):
        scene = load_scene(args.scene, cfg.supersample)
    times = evenly_spaced_times(args.targets)
    with stage("render"):
        rendered = render_quartet_with_targets(scene, times, cfg.threads)

    if args.flows == "analytic":
        provider = FlowProvider.fixed(rendered.gt_flows)
    else:
        provider = FlowProvider.estimator(**cfg.stage_settings("flow"))
    context = prepare_motion(rendered.frames, provider, cfg)
    base = rendered.frames[1]
    truth = rendered.target_images
    center = int(np.argmin([abs(t - 0.5) for t in times]))
    corners = cfg.stage_settings("corners")
    tracking = cfg.stage_settings("tracking")

    records = []
    for model in args.models:
        model_cfg = cfg.with_overrides(**VARIANTS[model])
        predictions = parallel_map(lambda t: synthesize(context, t, model_cfg), times, cfg.threads)
        with stage(f"metrics-{model}"):
            reports = [compute_quality(gt, pred) for gt, pred in zip(truth, predictions)]
            try:
                center_shift = asfp_for_frames(base, truth[center], predictions[center], **corners, **tracking)
                whole_shift = trajectory_shift(base, truth, predictions, **corners, **tracking)
            except MetricError as e:
                logger.warning("feature-point shift unavailable", model=model, reason=str(e))
                center_shift = whole_shift = None

        center_report = reports[center].model_copy(update={"asfp": center_shift})
        records.append(_score(model, args.flows, "center", [center_report]))
        whole = _score(model, args.flows, "whole", reports)
        records.append(whole.model_copy(update={"asfp": whole_shift}))

    for record in records:
        print(record.model_dump_json())
    print(_format_table(records), file=sys.stderr)
    return EXIT_OK


def cmd_upsample(args: argparse.Namespace, cfg: QuadFlowConfig) -> int:
    if args.factor < 2:
        print("quadflow upsample: error: --factor must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    with stage("read-input"):
        frames = [read_image(p) for p in args.inputs]
    sequence = upsample_sequence(frames, args.factor, cfg)
    width = max(4, int(math.log10(len(sequence))) + 1)
    with stage("write-output"):
        out_dir = _prepare_output_dir(args.out)
        for index, frame in enumerate(sequence):
            write_image(frame, out_dir / f"frame_{index:0{width}d}.pnm")
    return EXIT_OK


# =============================================================================
# Entry point
# =============================================================================
def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the chosen command and return the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        cfg = _settings_from_args(ConfigurationManager().load_config(), args)
    except ConfigurationError as e:
        print(f"quadflow: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(cfg.log_level, cfg.log_format)
    validation = validate_configuration(cfg)
    for warning in validation.warnings:
        logger.warning("configuration warning", detail=warning)

    try:
        return args.handler(args, cfg)
    except QuadFlowError as e:
        logger.error("command failed", command=args.command, error=str(e))
        print(f"quadflow {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
