"""
quadflow - Motion Models

Per-pixel constant-acceleration motion fitted from the flows to the previous
and next frames, and the uniform-motion baseline.

Time is measured in frame intervals: frames -1, 0, 1, 2 sit at t = -1, 0, 1, 2.
Under constant acceleration a pixel starting at x moves by

    d(t) = v * t + (a / 2) * t^2

so with f_0->1 = d(1) and f_0->-1 = d(-1):

    v     = (f_0->1 - f_0->-1) / 2
    a / 2 = (f_0->1 + f_0->-1) / 2
"""

import math
from dataclasses import dataclass

from .errors import ParameterError
from .imgio import FlowField, check_same_size


@dataclass(frozen=True)
class QuadraticMotion:
    """Velocity (px/frame) and half acceleration (px/frame^2) fields"""
    velocity: FlowField
    half_acceleration: FlowField

    def __post_init__(self):
        check_same_size("half_acceleration", self.velocity.size, self.half_acceleration.size)

    @property
    def acceleration(self) -> FlowField:
        return FlowField(2.0 * self.half_acceleration.data)


def fit_quadratic(f01: FlowField, f0m1: FlowField) -> QuadraticMotion:
    """
    Fit the quadratic model from the flows to the next and previous frames.

    Raises:
        DimensionMismatchError: If the flows differ in size
    """
    check_same_size("fit_quadratic f0m1", f01.size, f0m1.size)
    return QuadraticMotion(
        velocity=FlowField((f01.data - f0m1.data) / 2.0),
        half_acceleration=FlowField((f01.data + f0m1.data) / 2.0),
    )


def _check_time(t: float) -> None:
    if not (math.isfinite(t) and -1.0 <= t <= 1.0):
        raise ParameterError(f"t must lie in [-1, 1], got {t}")


def predict_flow(qm: QuadraticMotion, t: float) -> FlowField:
    """
    f_0->t = (a/2) t^2 + v t; t = 1 and t = -1 reproduce the fitted flows.
    The fit only spans frames -1 to 1, so t outside [-1, 1] is rejected.
    """
    _check_time(t)
    return FlowField(qm.half_acceleration.data * (t * t) + qm.velocity.data * t)


def predict_linear(f01: FlowField, t: float) -> FlowField:
    """Uniform motion: f_0->t = t f_0->1, for t in [-1, 1]"""
    _check_time(t)
    return FlowField(t * f01.data)
