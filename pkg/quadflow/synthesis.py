"""
quadflow - Frame Synthesis

Backward warping, fusion and the end-to-end interpolation pipeline:

    quartet flows -> motion fit (per side) -> f_0->t, f_1->t
                  -> reversal -> filtering -> backward warp I_0, I_1 -> fuse

I_-1 and I_2 only inform the motion fit; output pixels come from I_0 and I_1.
With reversal="naive" the splatting step is replaced by a per-pixel blend of
both forward flows, and filtering="off" skips the medoid filter.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from common.logging import get_logger
from common.utils import parallel_map
from config import QuadFlowConfig
from .errors import ParameterError, stage
from .filtering import filter_flow
from .flowest import FlowProvider, QuartetFlows, flows_for_quartet
from .imgio import FlowField, HoleMask, Image, check_same_size
from .quadmodel import QuadraticMotion, fit_quadratic, predict_flow, predict_linear
from .reversal import blend_reversal, reverse_flow

logger = get_logger(__name__)

DEGENERATE_DENOMINATOR = 1e-9


@dataclass(frozen=True, eq=False)
class FusionMask:
    """Per-pixel confidence m(u) in [0, 1] for the frame-0 warp"""
    data: np.ndarray

    def __post_init__(self):
        arr = np.clip(np.array(self.data, dtype=np.float64), 0.0, 1.0)
        if arr.ndim != 2:
            raise ParameterError(f"fusion mask must be HxW, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def uniform(cls, height: int, width: int, value: float = 0.5) -> "FusionMask":
        return cls(np.full((height, width), value))


# =============================================================================
# Warping & Fusion
# =============================================================================
def backward_warp(img: Image, flow: FlowField) -> Tuple[Image, np.ndarray]:
    """
    out(u) = bilinear sample of ``img`` at u + flow(u), clamp-to-edge.

    Returns the warped image and an H x W validity array that is False where the
    sample point leaves [0, W-1] x [0, H-1].
    """
    check_same_size("backward_warp flow", img.size, flow.size)
    height, width = img.size
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    xs = xx + flow.u
    ys = yy + flow.v
    valid = (xs >= 0) & (xs <= width - 1) & (ys >= 0) & (ys <= height - 1)

    channels = [
        ndimage.map_coordinates(img.data[:, :, c], [ys, xs], order=1, mode="nearest")
        for c in range(img.channels)
    ]
    return Image.from_array(np.stack(channels, axis=-1)), valid


def fuse(w0: Image, w1: Image, m: FusionMask, t: float) -> Image:
    """
    I_t = [(1-t) m w0 + t (1-m) w1] / [(1-t) m + t (1-m)]

    Temporally closer frames get more weight. m = 1 returns w0 and m = 0
    returns w1 exactly; a vanishing denominator falls back to (1-t) w0 + t w1.

    Raises:
        ParameterError: If t is outside (0, 1)
        DimensionMismatchError: If the inputs differ in size
    """
    if not (math.isfinite(t) and 0.0 < t < 1.0):
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    check_same_size("fuse w1", w0.size, w1.size)
    check_same_size("fuse mask", w0.size, m.data.shape)
    if w0.channels != w1.channels:
        raise ParameterError(f"channel mismatch: {w0.channels} vs {w1.channels}")

    mask = m.data[:, :, np.newaxis]
    a = (1.0 - t) * mask
    b = t * (1.0 - mask)
    denom = a + b
    blend = (1.0 - t) * w0.data + t * w1.data
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = (a * w0.data + b * w1.data) / denom
    out = np.where(denom < DEGENERATE_DENOMINATOR, blend, weighted)
    out = np.where(mask == 1.0, w0.data, out)
    out = np.where(mask == 0.0, w1.data, out)
    return Image.from_array(out)


def build_fusion_mask(holes0: HoleMask, valid0: np.ndarray, holes1: HoleMask, valid1: np.ndarray) -> FusionMask:
    """
    Rule-based mask: 0.5 by default, 0 where only side 0 is unusable (hole or
    warp left the frame), 1 where only side 1 is. Both-bad pixels keep 0.5,
    which is exactly the (1-t, t) temporal blend.
    """
    bad0 = holes0.data | ~valid0
    bad1 = holes1.data | ~valid1
    mask = np.full(bad0.shape, 0.5)
    mask[bad0 & ~bad1] = 0.0
    mask[bad1 & ~bad0] = 1.0
    return FusionMask(mask)


# =============================================================================
# Pipeline
# =============================================================================
@dataclass(frozen=True)
class MotionContext:
    """Everything that does not depend on t: flows and both motion fits"""
    frame0: Image
    frame1: Image
    flows: QuartetFlows
    side0: QuadraticMotion
    side1: QuadraticMotion


def prepare_motion(frames: Sequence[Image], provider: Optional[FlowProvider] = None,
                   cfg: Optional[QuadFlowConfig] = None) -> MotionContext:
    """
    Estimate (or load) the quartet flows and fit one motion model per side.
    Side 1 runs in mirrored time: frame 1 at 0, frame 0 at 1, frame 2 at -1.
    """
    cfg = cfg or QuadFlowConfig()
    if len(frames) != 4:
        raise ParameterError(f"expected 4 frames (I_-1, I_0, I_1, I_2), got {len(frames)}")
    provider = provider or FlowProvider.from_config(cfg)
    prev, frame0, frame1, nxt = frames

    with stage("flow"):
        flows = flows_for_quartet(provider, prev, frame0, frame1, nxt, threads=cfg.threads)
    with stage("motion-fit"):
        side0 = fit_quadratic(flows.f01, flows.f0m1)
        side1 = fit_quadratic(flows.f10, flows.f12)
    return MotionContext(frame0=frame0, frame1=frame1, flows=flows, side0=side0, side1=side1)


def _side_flow(ctx: MotionContext, side: int, t: float, model: str) -> FlowField:
    """Forward flow from frame ``side`` to time t"""
    local_t = t if side == 0 else 1.0 - t
    if model == "linear":
        return predict_linear(ctx.flows.f01 if side == 0 else ctx.flows.f10, local_t)
    return predict_flow(ctx.side0 if side == 0 else ctx.side1, local_t)


def _backward_flows(ctx: MotionContext, t: float, cfg: QuadFlowConfig) -> List[Tuple[FlowField, HoleMask]]:
    """Backward flows f_t->0 and f_t->1 with the holes left by reversal"""
    forward = []
    for side in (0, 1):
        with stage(f"predict-side{side}"):
            forward.append(_side_flow(ctx, side, t, cfg.model))

    if cfg.reversal == "naive":
        with stage("reversal-blend"):
            flows = blend_reversal(forward[0], forward[1], ctx.flows.f01, ctx.flows.f10, t)
        height, width = ctx.frame0.size
        return [(flow, HoleMask.empty(height, width)) for flow in flows]

    backward = []
    for side in (0, 1):
        with stage(f"reversal-side{side}"):
            reversed_ = reverse_flow(forward[side], **cfg.stage_settings("reversal"))
        backward.append((reversed_.flow, reversed_.holes))
    return backward


def synthesize(ctx: MotionContext, t: float, cfg: Optional[QuadFlowConfig] = None) -> Image:
    """Synthesize the frame at t from a prepared motion context"""
    cfg = cfg or QuadFlowConfig()
    if not (math.isfinite(t) and 0.0 < t < 1.0):
        raise ParameterError(f"t must lie in (0, 1), got {t}")

    warped = []
    sources = (ctx.frame0, ctx.frame1)
    for side, (flow, holes) in enumerate(_backward_flows(ctx, t, cfg)):
        if cfg.filtering == "medoid":
            with stage(f"filter-side{side}"):
                flow = filter_flow(flow, holes, **cfg.stage_settings("filter"))
        with stage(f"warp-side{side}"):
            image, valid = backward_warp(sources[side], flow)
        warped.append((image, valid, holes))

    (w0, valid0, holes0), (w1, valid1, holes1) = warped
    with stage("fusion"):
        mask = build_fusion_mask(holes0, valid0, holes1, valid1)
        result = fuse(w0, w1, mask, t)

    logger.debug("frame synthesized", t=t, model=cfg.model, reversal=cfg.reversal,
                 filtering=cfg.filtering, holes0=holes0.count, holes1=holes1.count)
    return result


def interpolate_many(frames: Sequence[Image], times: Sequence[float], cfg: Optional[QuadFlowConfig] = None,
                     provider: Optional[FlowProvider] = None) -> List[Image]:
    """
    Synthesize every t in ``times`` from one flow estimate and one motion fit.
    Independent t-values run on ``cfg.threads`` threads; output order follows
    ``times``.
    """
    cfg = cfg or QuadFlowConfig()
    for t in times:
        if not (math.isfinite(t) and 0.0 < t < 1.0):
            raise ParameterError(f"t must lie in (0, 1), got {t}")
    ctx = prepare_motion(frames, provider, cfg)
    outputs = parallel_map(lambda t: synthesize(ctx, t, cfg), list(times), cfg.threads)
    logger.info("interpolation done", frames=len(outputs), model=cfg.model)
    return outputs


def interpolate(prev: Image, frame0: Image, frame1: Image, nxt: Image, t: float,
                cfg: Optional[QuadFlowConfig] = None, provider: Optional[FlowProvider] = None) -> Image:
    """Synthesize the frame at t in (0, 1) between frame0 and frame1"""
    return interpolate_many([prev, frame0, frame1, nxt], [t], cfg, provider)[0]


def upsample_sequence(frames: Sequence[Image], factor: int, cfg: Optional[QuadFlowConfig] = None) -> List[Image]:
    """
    Temporally upsample a sequence by ``factor``: ``factor - 1`` new frames
    between every consecutive pair. The sequence ends are replicated to supply
    the missing outer neighbours of the first and last pair.
    """
    cfg = cfg or QuadFlowConfig()
    if factor < 2:
        raise ParameterError(f"upsampling factor must be at least 2, got {factor}")
    if len(frames) < 2:
        raise ParameterError(f"need at least 2 frames, got {len(frames)}")

    times = [k / factor for k in range(1, factor)]
    last = len(frames) - 1
    output = [frames[0]]
    for i in range(last):
        window = [frames[max(i - 1, 0)], frames[i], frames[i + 1], frames[min(i + 2, last)]]
        with stage(f"pair-{i}"):
            output.extend(interpolate_many(window, times, cfg))
        output.append(frames[i + 1])
    logger.info("sequence upsampled", input_frames=len(frames), output_frames=len(output), factor=factor)
    return output
