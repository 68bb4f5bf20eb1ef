"""
quadflow - Flow Estimation

Produces the four pairwise flow fields the pipeline consumes
(f_0->1, f_0->-1, f_1->0, f_1->2) from one of three sources:

- ``estimator``: built-in pyramidal Horn-Schunck with per-level warping
- ``files``: precomputed Middlebury ``.flo`` files from a path template
- ``fixed``: flows already in memory (e.g. analytic ground truth)
"""

import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import ndimage

from common.logging import get_logger
from common.utils import parallel_map
from .errors import FlowPairError, ParameterError, QuadFlowError
from .imgio import FlowField, Image, check_same_size, read_flo

logger = get_logger(__name__)

# Horn-Schunck neighbourhood average (weights sum to one, centre excluded)
HS_AVERAGE_KERNEL = np.array([
    [1 / 12, 1 / 6, 1 / 12],
    [1 / 6, 0.0, 1 / 6],
    [1 / 12, 1 / 6, 1 / 12],
])
CENTRAL_DIFFERENCE = np.array([-0.5, 0.0, 0.5])
MIN_COARSE_SIZE = 4

QUARTET_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 1), (0, -1), (1, 0), (1, 2))


# =============================================================================
# Horn-Schunck
# =============================================================================
def _downsample(img: np.ndarray) -> np.ndarray:
    """2x2 box prefilter and decimation; an odd trailing row/column is dropped"""
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    return img[:2 * h2, :2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def _sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sampling with clamp-to-edge borders"""
    return ndimage.map_coordinates(img, [ys, xs], order=1, mode="nearest")


def _upsample_flow(u: np.ndarray, v: np.ndarray, shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear upsampling to ``shape`` with magnitudes doubled"""
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    ys = (yy + 0.5) / 2.0 - 0.5
    xs = (xx + 0.5) / 2.0 - 0.5
    return 2.0 * _sample(u, ys, xs), 2.0 * _sample(v, ys, xs)


def _gradients(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(img, CENTRAL_DIFFERENCE, axis=1, mode="nearest")
    gy = ndimage.correlate1d(img, CENTRAL_DIFFERENCE, axis=0, mode="nearest")
    return gx, gy


def _refine_level(source: np.ndarray, target: np.ndarray, u: np.ndarray, v: np.ndarray,
                  alpha: float, iterations: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    One warp followed by Jacobi sweeps on the linearized Horn-Schunck energy.
    Smoothness acts on the total flow; the data term on the increment over (u0, v0).
    """
    yy, xx = np.mgrid[0:source.shape[0], 0:source.shape[1]].astype(np.float64)
    warped = _sample(target, yy + v, xx + u)

    sx, sy = _gradients(source)
    wx, wy = _gradients(warped)
    ix = 0.5 * (sx + wx)
    iy = 0.5 * (sy + wy)
    it = warped - source

    u0, v0 = u, v
    denom = alpha * alpha + ix * ix + iy * iy
    for _ in range(iterations):
        # read-only inputs, fresh outputs: the sweep order cannot change the result
        u_bar = ndimage.convolve(u, HS_AVERAGE_KERNEL, mode="nearest")
        v_bar = ndimage.convolve(v, HS_AVERAGE_KERNEL, mode="nearest")
        residual = (ix * (u_bar - u0) + iy * (v_bar - v0) + it) / denom
        u = u_bar - ix * residual
        v = v_bar - iy * residual
    return u, v


def estimate_flow(source: Image, target: Image, levels: int = 3, alpha: float = 10.0,
                  iterations: int = 100) -> FlowField:
    """
    Estimate the flow mapping each source pixel x to target position x + f(x).

    Pyramidal Horn-Schunck on luma in 8-bit units: ``levels`` levels of 2x2 box
    decimation, one warp per level, ``iterations`` Jacobi sweeps per level,
    bilinear coarse-to-fine upsampling. Deterministic for fixed inputs.

    Raises:
        DimensionMismatchError: If the images differ in size
        ParameterError: If a parameter is out of range or the images are too
            small for the requested pyramid
    """
    check_same_size("estimate_flow target", source.size, target.size)
    if levels < 1 or iterations < 1 or not alpha > 0:
        raise ParameterError(f"invalid estimator parameters levels={levels} alpha={alpha} iterations={iterations}")
    coarse = min(source.size) >> (levels - 1)
    if coarse < MIN_COARSE_SIZE:
        raise ParameterError(
            f"image {source.width}x{source.height} is too small for {levels} pyramid levels "
            f"(coarsest side {coarse} < {MIN_COARSE_SIZE})"
        )

    started = time.perf_counter()
    src_pyramid = [source.luma() * 255.0]
    dst_pyramid = [target.luma() * 255.0]
    for _ in range(levels - 1):
        src_pyramid.append(_downsample(src_pyramid[-1]))
        dst_pyramid.append(_downsample(dst_pyramid[-1]))

    u = np.zeros_like(src_pyramid[-1])
    v = np.zeros_like(src_pyramid[-1])
    for level in range(levels - 1, -1, -1):
        src, dst = src_pyramid[level], dst_pyramid[level]
        if u.shape != src.shape:
            u, v = _upsample_flow(u, v, src.shape)
        u, v = _refine_level(src, dst, u, v, alpha, iterations)

    logger.debug(
        "flow estimated",
        width=source.width, height=source.height, levels=levels,
        elapsed_ms=round(1000 * (time.perf_counter() - started), 1),
    )
    return FlowField.from_components(u, v)


# =============================================================================
# Providers
# =============================================================================
@dataclass(frozen=True)
class QuartetFlows:
    """The four pairwise flows around the interpolation interval [0, 1]"""
    f01: FlowField
    f0m1: FlowField
    f10: FlowField
    f12: FlowField

    @classmethod
    def from_pairs(cls, flows: Dict[Tuple[int, int], FlowField]) -> "QuartetFlows":
        return cls(f01=flows[(0, 1)], f0m1=flows[(0, -1)], f10=flows[(1, 0)], f12=flows[(1, 2)])

    def by_pair(self) -> Dict[Tuple[int, int], FlowField]:
        return {(0, 1): self.f01, (0, -1): self.f0m1, (1, 0): self.f10, (1, 2): self.f12}


class FlowProviderMode(str, Enum):
    ESTIMATOR = "estimator"
    FILES = "files"
    FIXED = "fixed"


@dataclass(frozen=True)
class FlowProvider:
    """
    Where the quartet flows come from. Build with ``estimator()``, ``files()``,
    ``fixed()`` or ``from_config()``.
    """
    mode: FlowProviderMode = FlowProviderMode.ESTIMATOR
    levels: int = 3
    alpha: float = 10.0
    iterations: int = 100
    template: Optional[str] = None
    flows: Optional[QuartetFlows] = None

    @classmethod
    def estimator(cls, levels: int = 3, alpha: float = 10.0, iterations: int = 100) -> "FlowProvider":
        return cls(mode=FlowProviderMode.ESTIMATOR, levels=levels, alpha=alpha, iterations=iterations)

    @classmethod
    def files(cls, template: str) -> "FlowProvider":
        """``template`` such as ``flow_{src}to{dst}.flo``; indices are in {-1, 0, 1, 2}"""
        if "{src}" not in template or "{dst}" not in template:
            raise ParameterError(f"flow template {template!r} needs both {{src}} and {{dst}}")
        return cls(mode=FlowProviderMode.FILES, template=template)

    @classmethod
    def fixed(cls, flows: QuartetFlows) -> "FlowProvider":
        return cls(mode=FlowProviderMode.FIXED, flows=flows)

    @classmethod
    def from_config(cls, config) -> "FlowProvider":
        """Provider described by a QuadFlowConfig (``flows`` = 'estimate' or a template)"""
        if config.uses_estimator:
            return cls.estimator(**config.stage_settings("flow"))
        return cls.files(config.flows)

    def path_for(self, src: int, dst: int) -> Path:
        return Path(self.template.format(src=src, dst=dst))


def flows_for_quartet(provider: FlowProvider, prev: Image, frame0: Image, frame1: Image, nxt: Image,
                      threads: int = 1) -> QuartetFlows:
    """
    Produce f_0->1, f_0->-1, f_1->0 and f_1->2 for frames I_-1, I_0, I_1, I_2.

    Raises:
        DimensionMismatchError: If the frames differ in size
        FlowPairError: Tagged with the (src, dst) pair that failed
    """
    frames = {-1: prev, 0: frame0, 1: frame1, 2: nxt}
    for index, frame in frames.items():
        check_same_size(f"frame {index}", frame0.size, frame.size)

    def produce(pair: Tuple[int, int]) -> FlowField:
        src, dst = pair
        try:
            if provider.mode is FlowProviderMode.ESTIMATOR:
                flow = estimate_flow(frames[src], frames[dst], levels=provider.levels,
                                     alpha=provider.alpha, iterations=provider.iterations)
            elif provider.mode is FlowProviderMode.FILES:
                flow = read_flo(provider.path_for(src, dst))
            else:
                flow = provider.flows.by_pair()[pair]
            check_same_size("flow field", frame0.size, flow.size)
        except QuadFlowError as e:
            raise FlowPairError(pair, e) from e
        return flow

    results = parallel_map(produce, list(QUARTET_PAIRS), threads)
    logger.info("quartet flows ready", mode=provider.mode.value, width=frame0.width, height=frame0.height)
    return QuartetFlows.from_pairs(dict(zip(QUARTET_PAIRS, results)))
