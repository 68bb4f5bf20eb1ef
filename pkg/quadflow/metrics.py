"""
quadflow - Quality Metrics

Full-reference image quality (PSNR, SSIM, interpolation error) and the
feature-point shift metric: Shi-Tomasi corners are detected on the true I_0,
tracked with pyramidal Lucas-Kanade into both the ground-truth and the
predicted frame, and the mean Euclidean distance between the two tracked
positions is reported (ASFP).
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import cv2
import numpy as np
from pydantic import BaseModel
from skimage.metrics import structural_similarity

from common.logging import get_logger
from .errors import MetricError, ParameterError
from .imgio import Image, check_same_size

logger = get_logger(__name__)

PSNR_CAP_DB = 99.0
MSE_FLOOR = 1e-10
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0
SSIM_WINDOW = 11


class QualityReport(BaseModel):
    """One row of quality numbers; serializes to a JSON-lines record"""
    psnr: float
    ssim: Optional[float] = None
    ie: float
    asfp: Optional[float] = None


@dataclass(frozen=True, eq=False)
class PointList:
    """Ordered subpixel (x, y) positions with parallel validity flags"""
    points: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        ok = np.array(self.valid, dtype=bool).reshape(-1)
        if ok.shape[0] != pts.shape[0]:
            raise ParameterError(f"{pts.shape[0]} points but {ok.shape[0]} validity flags")
        pts.setflags(write=False)
        ok.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "valid", ok)

    @classmethod
    def from_points(cls, points) -> "PointList":
        pts = np.array(points, dtype=np.float64).reshape(-1, 2)
        return cls(pts, np.ones(pts.shape[0], dtype=bool))

    def __len__(self) -> int:
        return self.points.shape[0]


# =============================================================================
# Full-reference quality
# =============================================================================
def compute_quality(reference: Image, prediction: Image) -> QualityReport:
    """
    PSNR and IE on 8-bit-scaled samples over all channels; SSIM on luma with an
    11x11 Gaussian window (sigma 1.5), averaged over window centres whose window
    lies inside the image. Images smaller than the window get no SSIM.

    Raises:
        DimensionMismatchError: If the images differ in size
        MetricError: If the channel counts differ
    """
    check_same_size("compute_quality prediction", reference.size, prediction.size)
    if reference.channels != prediction.channels:
        raise MetricError(f"channel mismatch: {reference.channels} vs {prediction.channels}")

    diff = (reference.data - prediction.data) * PEAK
    mse = float(np.mean(diff * diff))
    ie = math.sqrt(mse)
    psnr = PSNR_CAP_DB if mse < MSE_FLOOR else 10.0 * math.log10(PEAK * PEAK / mse)

    if min(reference.size) < SSIM_WINDOW:
        logger.debug("image smaller than the SSIM window", width=reference.width, height=reference.height)
        return QualityReport(psnr=psnr, ie=ie)

    ssim = structural_similarity(
        reference.luma() * PEAK,
        prediction.luma() * PEAK,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=PEAK,
        K1=SSIM_K1,
        K2=SSIM_K2,
    )
    return QualityReport(psnr=psnr, ssim=float(ssim), ie=ie)


# =============================================================================
# Corners & Tracking
# =============================================================================
def detect_corners(img: Image, max_points: int = 500, quality: float = 0.01,
                   min_distance: float = 8.0) -> PointList:
    """
    Shi-Tomasi corners: local maxima of the structure tensor's minimum
    eigenvalue (Sobel gradients, 3x3 window) scoring at least ``quality`` times
    the strongest, thinned greedily by ``min_distance``, strongest first.
    A constant image yields an empty list.
    """
    if max_points < 1:
        raise ParameterError(f"max_points must be at least 1, got {max_points}")
    gray = img.luma().astype(np.float32)
    found = cv2.goodFeaturesToTrack(
        gray,
        maxCorners=max_points,
        qualityLevel=quality,
        minDistance=min_distance,
        blockSize=3,
        useHarrisDetector=False,
    )
    if found is None:
        return PointList(np.zeros((0, 2)), np.zeros(0, dtype=bool))
    return PointList.from_points(found.reshape(-1, 2))


def _inside(points: np.ndarray, width: int, height: int) -> np.ndarray:
    return (
        (points[:, 0] >= 0) & (points[:, 0] <= width - 1)
        & (points[:, 1] >= 0) & (points[:, 1] <= height - 1)
    )


def track_points(source: Image, target: Image, points: PointList, levels: int = 3, window: int = 21,
                 iterations: int = 30, epsilon: float = 0.01) -> PointList:
    """
    Pyramidal Lucas-Kanade from ``source`` into ``target``. A point becomes
    invalid when it starts or ends outside the frame, when it was already
    invalid, or when the tracker reports failure.
    """
    check_same_size("track_points target", source.size, target.size)
    width, height = source.width, source.height
    start = points.points
    valid = points.valid & _inside(start, width, height)
    moved = start.copy()
    if not valid.any():
        return PointList(moved, valid)

    prev_gray = Image(source.luma()).to_uint8()[:, :, 0]
    next_gray = Image(target.luma()).to_uint8()[:, :, 0]
    seeds = start[valid].astype(np.float32).reshape(-1, 1, 2)
    tracked, status, _err = cv2.calcOpticalFlowPyrLK(
        prev_gray,
        next_gray,
        seeds,
        None,
        winSize=(window, window),
        maxLevel=levels - 1,
        criteria=(cv2.TERM_CRITERIA_COUNT | cv2.TERM_CRITERIA_EPS, iterations, epsilon),
    )
    tracked = tracked.reshape(-1, 2).astype(np.float64)
    ok = status.reshape(-1).astype(bool) & np.all(np.isfinite(tracked), axis=1)
    ok &= _inside(tracked, width, height)

    moved[valid] = np.where(ok[:, np.newaxis], tracked, start[valid])
    now_valid = valid.copy()
    now_valid[valid] = ok
    return PointList(moved, now_valid)


def track_trajectory(base: Image, frames: Sequence[Image], points: PointList, **tracking) -> List[PointList]:
    """
    Follow ``points`` from ``base`` through ``frames`` in order, chaining the
    tracker frame to frame. Returns one PointList per frame; a point lost once
    stays invalid.
    """
    trajectory = []
    current, previous = points, base
    for frame in frames:
        current = track_points(previous, frame, current, **tracking)
        trajectory.append(current)
        previous = frame
    return trajectory


# =============================================================================
# Average shift of feature points
# =============================================================================
def asfp(gt_points: PointList, pred_points: PointList) -> float:
    """
    Mean Euclidean distance between aligned points over the indices valid in
    both lists.

    Raises:
        MetricError: If the lists are misaligned or share no valid point
    """
    if len(gt_points) != len(pred_points):
        raise MetricError(f"point lists differ in length: {len(gt_points)} vs {len(pred_points)}")
    common = gt_points.valid & pred_points.valid
    if not common.any():
        raise MetricError("no feature point is valid in both lists")
    delta = gt_points.points[common] - pred_points.points[common]
    return float(np.mean(np.sqrt(np.sum(delta * delta, axis=1))))


def asfp_for_frames(base: Image, ground_truth: Image, prediction: Image, max_points: int = 500,
                    quality: float = 0.01, min_distance: float = 8.0, **tracking) -> float:
    """Corners on the true I_0, tracked independently into I_t and the prediction"""
    corners = detect_corners(base, max_points=max_points, quality=quality, min_distance=min_distance)
    if len(corners) == 0:
        raise MetricError("no corners found on the base frame")
    gt_track = track_points(base, ground_truth, corners, **tracking)
    pred_track = track_points(base, prediction, corners, **tracking)
    return asfp(gt_track, pred_track)


def trajectory_shift(base: Image, ground_truth: Sequence[Image], predictions: Sequence[Image],
                     max_points: int = 500, quality: float = 0.01, min_distance: float = 8.0,
                     **tracking) -> float:
    """
    ASFP averaged over a whole in-between sequence, with points chained through
    the ground-truth frames and, separately, through the predicted frames.
    """
    if len(ground_truth) != len(predictions) or not predictions:
        raise MetricError("ground-truth and predicted sequences must be non-empty and equally long")
    corners = detect_corners(base, max_points=max_points, quality=quality, min_distance=min_distance)
    if len(corners) == 0:
        raise MetricError("no corners found on the base frame")
    gt_path = track_trajectory(base, ground_truth, corners, **tracking)
    pred_path = track_trajectory(base, predictions, corners, **tracking)
    return float(np.mean([asfp(g, p) for g, p in zip(gt_path, pred_path)]))
