"""
quadflow - acceleration-aware video frame interpolation.

Synthesizes frames at any t in (0, 1) between I_0 and I_1 from the quartet
I_-1, I_0, I_1, I_2: per-pixel quadratic motion is fitted from the flows to the
neighbouring frames, the predicted forward flow is reversed by Gaussian
splatting, cleaned by a medoid filter, and the two backward warps are fused.
"""

from .errors import (
    DimensionMismatchError,
    FlowPairError,
    FormatError,
    MetricError,
    ParameterError,
    QuadFlowError,
    SceneError,
    StageError,
    StorageError,
)
from .filtering import filter_flow
from .flowest import FlowProvider, QuartetFlows, estimate_flow
from .imgio import FlowField, HoleMask, Image, read_flo, read_image, write_flo, write_image
from .metrics import PointList, QualityReport, asfp, compute_quality, detect_corners, track_points
from .quadmodel import QuadraticMotion, fit_quadratic, predict_flow, predict_linear
from .reversal import ReversalResult, blend_reversal, reverse_flow
from .synthesis import FusionMask, backward_warp, fuse, interpolate, interpolate_many, upsample_sequence
from .synthgen import SceneSpec, SpriteSpec, analytic_flow, render_frame, render_quartet_with_targets

__version__ = "0.1.0"
