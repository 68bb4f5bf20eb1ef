"""
Tests for flow reversal by Gaussian splatting, including the direct
double-loop oracle.
"""

import math

import numpy as np
import pytest

from quadflow.errors import DimensionMismatchError, ParameterError
from quadflow.imgio import FlowField
from quadflow.reversal import HOLE_WEIGHT_THRESHOLD, blend_reversal, reverse_flow


def reversal_oracle(f0t: FlowField, sigma: float, radius: float):
    """Literal definition: every target pixel against every source pixel"""
    height, width = f0t.size
    flow = np.zeros((height, width, 2))
    holes = np.zeros((height, width), dtype=bool)
    for ty in range(height):
        for tx in range(width):
            total = 0.0
            acc_u = 0.0
            acc_v = 0.0
            for sy in range(height):
                for sx in range(width):
                    px = sx + f0t.u[sy, sx]
                    py = sy + f0t.v[sy, sx]
                    if not (0 <= px <= width - 1 and 0 <= py <= height - 1):
                        continue
                    if abs(px - tx) >= radius or abs(py - ty) >= radius:
                        continue
                    w = math.exp(-((px - tx) ** 2 + (py - ty) ** 2) / sigma ** 2)
                    total += w
                    acc_u += -f0t.u[sy, sx] * w
                    acc_v += -f0t.v[sy, sx] * w
            if total < HOLE_WEIGHT_THRESHOLD:
                holes[ty, tx] = True
            else:
                flow[ty, tx] = acc_u / total, acc_v / total
    return flow, holes


def vectorized_oracle(f0t: FlowField, sigma: float, radius: float):
    """Same definition as an all-pairs array computation, fast enough for many fields"""
    height, width = f0t.size
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    px = (xx + f0t.u).ravel()
    py = (yy + f0t.v).ravel()
    inside = (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1)
    dx = px[np.newaxis, :] - xx.ravel()[:, np.newaxis]
    dy = py[np.newaxis, :] - yy.ravel()[:, np.newaxis]
    near = inside[np.newaxis, :] & (np.abs(dx) < radius) & (np.abs(dy) < radius)
    w = np.where(near, np.exp(-(dx * dx + dy * dy) / sigma ** 2), 0.0)
    total = w.sum(axis=1)
    holes = total < HOLE_WEIGHT_THRESHOLD
    safe = np.where(holes, 1.0, total)
    u = np.where(holes, 0.0, (w @ -f0t.u.ravel()) / safe)
    v = np.where(holes, 0.0, (w @ -f0t.v.ravel()) / safe)
    return np.stack([u, v], axis=-1).reshape(height, width, 2), holes.reshape(height, width)


def test_matches_literal_oracle_on_small_field(rng):
    f0t = FlowField(rng.normal(0.0, 1.5, size=(7, 8, 2)))
    expected_flow, expected_holes = reversal_oracle(f0t, 1.0, 1)
    result = reverse_flow(f0t, sigma=1.0, radius=1)
    assert np.array_equal(result.holes.data, expected_holes)
    assert np.max(np.abs(result.flow.data - expected_flow)) <= 1e-9


@pytest.mark.parametrize("sigma,radius", [(1.0, 1), (0.7, 2), (2.0, 3)])
def test_matches_vectorized_oracle(rng, sigma, radius):
    f0t = FlowField(rng.normal(0.0, 3.0, size=(24, 24, 2)))
    expected_flow, expected_holes = vectorized_oracle(f0t, sigma, radius)
    result = reverse_flow(f0t, sigma=sigma, radius=radius)
    assert np.array_equal(result.holes.data, expected_holes)
    assert np.max(np.abs(result.flow.data - expected_flow)) <= 1e-9


def test_zero_flow_reverses_to_zero_without_holes():
    result = reverse_flow(FlowField.zeros(10, 12))
    assert result.holes.count == 0
    assert np.all(result.flow.data == 0.0)


def test_integer_translation_reverses_exactly():
    result = reverse_flow(FlowField.constant(20, 20, 3.0, 0.0))
    # the three leftmost columns receive nothing; the rest come from x - 3
    assert np.all(result.holes.data[:, :3])
    assert not result.holes.data[:, 3:].any()
    assert np.all(result.flow.data[:, 3:, 0] == -3.0)
    assert np.all(result.flow.data[:, 3:, 1] == 0.0)
    assert np.all(result.flow.data[result.holes.data] == 0.0)


def test_half_pixel_shift_spreads_over_two_targets():
    result = reverse_flow(FlowField.constant(6, 6, 0.5, 0.0))
    expected = math.exp(-0.25)
    assert result.holes.count == 0
    assert result.weight_sum[2, 3] == pytest.approx(2 * expected)
    # column 0 only sees source 0; the last source lands past the edge
    assert result.weight_sum[2, 0] == pytest.approx(expected)
    assert result.weight_sum[2, 5] == pytest.approx(expected)
    assert np.allclose(result.flow.u, -0.5)


def test_sources_leaving_the_frame_contribute_nothing():
    f0t = FlowField.constant(8, 8, 100.0, 0.0)
    result = reverse_flow(f0t)
    assert result.holes.count == 64
    assert np.all(result.weight_sum == 0.0)


def test_is_deterministic(rng):
    f0t = FlowField(rng.normal(0.0, 2.0, size=(32, 32, 2)))
    first = reverse_flow(f0t)
    second = reverse_flow(f0t)
    assert np.array_equal(first.flow.data, second.flow.data)


@pytest.mark.parametrize("sigma,radius", [(0.0, 1), (-1.0, 1), (1.0, 0.5), (math.nan, 1)])
def test_rejects_bad_parameters(sigma, radius):
    with pytest.raises(ParameterError):
        reverse_flow(FlowField.zeros(4, 4), sigma=sigma, radius=radius)


@pytest.mark.parametrize("sigma,radius", [(1.0, 1), (1.5, 2)])
def test_backward_flow_stays_within_its_contributions(rng, sigma, radius):
    height, width = 16, 16
    f0t = FlowField(rng.normal(0.0, 2.0, size=(height, width, 2)))
    result = reverse_flow(f0t, sigma=sigma, radius=radius)

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    px = (xx + f0t.u).ravel()
    py = (yy + f0t.v).ravel()
    inside = (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1)
    near = (
        inside[np.newaxis, :]
        & (np.abs(px[np.newaxis, :] - xx.ravel()[:, np.newaxis]) < radius)
        & (np.abs(py[np.newaxis, :] - yy.ravel()[:, np.newaxis]) < radius)
    )
    filled = ~result.holes.data.ravel()
    assert filled.any()
    for comp in range(2):
        negated = -f0t.data[..., comp].ravel()
        low = np.where(near, negated[np.newaxis, :], np.inf).min(axis=1)
        high = np.where(near, negated[np.newaxis, :], -np.inf).max(axis=1)
        out = result.flow.data[..., comp].ravel()
        assert np.all(out[filled] >= low[filled] - 1e-12)
        assert np.all(out[filled] <= high[filled] + 1e-12)


# =============================================================================
# Blend reversal
# =============================================================================
def test_blend_reversal_matches_linear_closed_form():
    f01 = FlowField.constant(4, 5, 2.0, -1.0)
    f10 = FlowField.constant(4, 5, -3.0, 0.5)
    t = 0.25
    ft0, ft1 = blend_reversal(FlowField(t * f01.data), FlowField((1 - t) * f10.data), f01, f10, t)
    assert np.allclose(ft0.data, -(1 - t) * t * f01.data + t * t * f10.data, atol=1e-12)
    assert np.allclose(ft1.data, (1 - t) ** 2 * f01.data - t * (1 - t) * f10.data, atol=1e-12)


def test_blend_reversal_inverts_uniform_motion():
    f01 = FlowField.constant(6, 6, 4.0, 2.0)
    f10 = FlowField(-f01.data)
    ft0, ft1 = blend_reversal(FlowField(0.5 * f01.data), FlowField(0.5 * f10.data), f01, f10, 0.5)
    assert np.allclose(ft0.data, -0.5 * f01.data, atol=1e-12)
    assert np.allclose(ft1.data, 0.5 * f01.data, atol=1e-12)


def test_blend_reversal_rejects_bad_input():
    zero = FlowField.zeros(3, 3)
    with pytest.raises(DimensionMismatchError):
        blend_reversal(zero, FlowField.zeros(3, 4), zero, zero, 0.5)
    with pytest.raises(ParameterError):
        blend_reversal(zero, zero, zero, zero, 1.0)
