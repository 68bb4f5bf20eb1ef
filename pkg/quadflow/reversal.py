"""
quadflow - Flow Reversal Layer

Turns the forward flow f_0->t into the backward flow f_t->0 by splatting every
source pixel's negated flow onto the integer pixels around its landing point:

    f_t->0(u) = sum_x w(d) * (-f_0->t(x)) / sum_x w(d),   w(d) = exp(-d^2 / sigma^2)

over sources x whose landing point p = x + f_0->t(x) is within Chebyshev
distance ``radius`` of u, with d = ||p - u||_2. Targets receiving less than
HOLE_WEIGHT_THRESHOLD total weight are holes and carry flow (0, 0).
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from common.logging import get_logger
from .errors import ParameterError
from .imgio import FlowField, HoleMask, check_same_size

logger = get_logger(__name__)

HOLE_WEIGHT_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class ReversalResult:
    """Backward flow, its hole mask and the splat weight denominator"""
    flow: FlowField
    holes: HoleMask
    weight_sum: np.ndarray


def reverse_flow(f0t: FlowField, sigma: float = 1.0, radius: float = 1) -> ReversalResult:
    """
    Reverse a forward flow by Gaussian-weighted splatting.

    Sources landing outside [0, W-1] x [0, H-1] contribute nothing. The sum is
    accumulated footprint offset by footprint offset, each offset in source
    row-major order, so the result is bit-identical from run to run.

    Raises:
        ParameterError: If sigma is not positive or radius is below 1
    """
    if not (math.isfinite(sigma) and sigma > 0):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if not (math.isfinite(radius) and radius >= 1):
        raise ParameterError(f"radius must be at least 1, got {radius}")

    height, width = f0t.size
    n_pixels = height * width
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    px = (xx + f0t.u).ravel()
    py = (yy + f0t.v).ravel()
    neg_u = -f0t.u.ravel()
    neg_v = -f0t.v.ravel()

    inside = (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1)
    # first integer strictly inside the open interval (p - radius, p + radius)
    base_x = np.floor(px - radius) + 1
    base_y = np.floor(py - radius) + 1
    span = int(math.ceil(2 * radius))

    weight_sum = np.zeros(n_pixels)
    sum_u = np.zeros(n_pixels)
    sum_v = np.zeros(n_pixels)
    inv_sigma2 = 1.0 / (sigma * sigma)
    for jy in range(span):
        ty = base_y + jy
        dy = py - ty
        for jx in range(span):
            tx = base_x + jx
            dx = px - tx
            keep = (
                inside
                & (np.abs(dx) < radius) & (np.abs(dy) < radius)
                & (tx >= 0) & (tx <= width - 1) & (ty >= 0) & (ty <= height - 1)
            )
            if not keep.any():
                continue
            target = (ty[keep] * width + tx[keep]).astype(np.intp)
            w = np.exp(-(dx[keep] * dx[keep] + dy[keep] * dy[keep]) * inv_sigma2)
            weight_sum += np.bincount(target, weights=w, minlength=n_pixels)
            sum_u += np.bincount(target, weights=w * neg_u[keep], minlength=n_pixels)
            sum_v += np.bincount(target, weights=w * neg_v[keep], minlength=n_pixels)

    holes = weight_sum < HOLE_WEIGHT_THRESHOLD
    safe = np.where(holes, 1.0, weight_sum)
    flow_u = np.where(holes, 0.0, sum_u / safe)
    flow_v = np.where(holes, 0.0, sum_v / safe)

    result = ReversalResult(
        flow=FlowField.from_components(flow_u.reshape(height, width), flow_v.reshape(height, width)),
        holes=HoleMask(holes.reshape(height, width)),
        weight_sum=weight_sum.reshape(height, width),
    )
    result.weight_sum.setflags(write=False)
    logger.debug("flow reversed", width=width, height=height, holes=result.holes.count)
    return result


def blend_reversal(f0t: FlowField, f1t: FlowField, f01: FlowField, f10: FlowField,
                   t: float) -> Tuple[FlowField, FlowField]:
    """
    Approximate both backward flows without splatting, reading every field at
    the target pixel itself:

        f_t->0 = (1-t) (-f_0->t) + t (f_1->0 - f_1->t)
        f_t->1 = t (-f_1->t) + (1-t) (f_0->1 - f_0->t)

    With linear motion this is f_t->0 = -(1-t) t f_0->1 + t^2 f_1->0 and
    f_t->1 = (1-t)^2 f_0->1 - t (1-t) f_1->0. Nothing is left unassigned, so
    there are no holes.

    Raises:
        ParameterError: If t is outside (0, 1)
    """
    if not (math.isfinite(t) and 0.0 < t < 1.0):
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    for name, field in (("f1t", f1t), ("f01", f01), ("f10", f10)):
        check_same_size(f"blend_reversal {name}", f0t.size, field.size)

    ft0 = (1.0 - t) * -f0t.data + t * (f10.data - f1t.data)
    ft1 = t * -f1t.data + (1.0 - t) * (f01.data - f0t.data)
    return FlowField(ft0), FlowField(ft1)
