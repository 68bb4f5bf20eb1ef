"""
quadflow - Flow Filtering

Spike removal and hole filling for reversed flow. Each output pixel samples a
single flow vector from its neighbourhood, never an average: the candidate set
is every non-hole flow within Chebyshev radius k_f, and the sample is the
candidate's medoid (minimum summed Euclidean distance to all candidates).

- hole pixels take the medoid
- non-hole pixels farther than tau from the medoid take the medoid
- every other pixel keeps its own value
- pixels with no candidates output (0, 0)
"""

import math

import numpy as np

from common.logging import get_logger
from .errors import ParameterError
from .imgio import FlowField, HoleMask, check_same_size

logger = get_logger(__name__)

MAX_FILTER_RADIUS = 10


def _shifted(padded: np.ndarray, dy: int, dx: int, k: int, height: int, width: int) -> np.ndarray:
    return padded[k + dy:k + dy + height, k + dx:k + dx + width]


def medoid_field(f: FlowField, holes: HoleMask, k_f: int):
    """
    Per-pixel medoid of the non-hole flows within radius ``k_f``.

    Returns ``(medoid, has_candidates)``. Candidates are scanned in row-major
    order of their pixel, so ties resolve to the earliest one and the summed
    distances are accumulated in that same order.
    """
    height, width = f.size
    k = k_f
    padded_flow = np.pad(f.data, ((k, k), (k, k), (0, 0)))
    padded_valid = np.pad(~holes.data, k, constant_values=False)
    offsets = [(dy, dx) for dy in range(-k, k + 1) for dx in range(-k, k + 1)]

    cand_u = [_shifted(padded_flow[:, :, 0], dy, dx, k, height, width) for dy, dx in offsets]
    cand_v = [_shifted(padded_flow[:, :, 1], dy, dx, k, height, width) for dy, dx in offsets]
    cand_ok = [_shifted(padded_valid, dy, dx, k, height, width) for dy, dx in offsets]

    best_cost = np.full((height, width), np.inf)
    best_u = np.zeros((height, width))
    best_v = np.zeros((height, width))
    for i in range(len(offsets)):
        cost = np.zeros((height, width))
        for j in range(len(offsets)):
            du = cand_u[i] - cand_u[j]
            dv = cand_v[i] - cand_v[j]
            cost = cost + np.where(cand_ok[j], np.sqrt(du * du + dv * dv), 0.0)
        cost = np.where(cand_ok[i], cost, np.inf)
        # strict comparison keeps the earliest candidate on ties
        better = cost < best_cost
        best_cost = np.where(better, cost, best_cost)
        best_u = np.where(better, cand_u[i], best_u)
        best_v = np.where(better, cand_v[i], best_v)

    has_candidates = np.isfinite(best_cost)
    return np.stack([best_u, best_v], axis=-1), has_candidates


def filter_flow(f: FlowField, holes: HoleMask, k_f: int = 2, tau: float = 2.0) -> FlowField:
    """
    Replace spikes and fill holes with the neighbourhood medoid.

    Raises:
        DimensionMismatchError: If the mask does not match the flow
        ParameterError: If k_f is outside [1, 10] or tau is negative
    """
    check_same_size("filter_flow holes", f.size, holes.size)
    if int(k_f) != k_f or not 1 <= k_f <= MAX_FILTER_RADIUS:
        raise ParameterError(f"k_f must be an integer in [1, {MAX_FILTER_RADIUS}], got {k_f}")
    if not (math.isfinite(tau) and tau >= 0):
        raise ParameterError(f"tau must be non-negative, got {tau}")

    medoid, has_candidates = medoid_field(f, holes, int(k_f))
    deviation = np.hypot(f.u - medoid[:, :, 0], f.v - medoid[:, :, 1])
    replace = holes.data | (deviation > tau)
    out = np.where(replace[:, :, np.newaxis], medoid, f.data)

    logger.debug(
        "flow filtered",
        replaced=int((replace & ~holes.data).sum()),
        filled=int((holes.data & has_candidates).sum()),
        unfilled=int((holes.data & ~has_candidates).sum()),
    )
    return FlowField(out)
