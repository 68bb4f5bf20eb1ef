"""
Tests for the quadratic and linear motion models.
"""

import math

import numpy as np
import pytest

from quadflow.errors import DimensionMismatchError, ParameterError
from quadflow.imgio import FlowField
from quadflow.quadmodel import fit_quadratic, predict_flow, predict_linear
from quadflow.synthgen import analytic_flow
from tests.helpers import blob_scene


def test_fit_recovers_velocity_and_acceleration():
    f01 = FlowField.constant(4, 4, 5.0, 0.0)
    f0m1 = FlowField.constant(4, 4, -3.0, 0.0)
    qm = fit_quadratic(f01, f0m1)
    assert np.allclose(qm.velocity.u, 4.0)
    assert np.allclose(qm.half_acceleration.u, 1.0)
    assert np.allclose(qm.acceleration.u, 2.0)


def test_prediction_at_half():
    qm = fit_quadratic(FlowField.constant(2, 2, 5.0, 0.0), FlowField.constant(2, 2, -3.0, 0.0))
    assert np.all(predict_flow(qm, 0.5).u == 2.25)


def test_endpoints_reproduce_inputs(rng):
    f01 = FlowField(rng.normal(0, 5, size=(16, 16, 2)))
    f0m1 = FlowField(rng.normal(0, 5, size=(16, 16, 2)))
    qm = fit_quadratic(f01, f0m1)
    assert np.max(np.abs(predict_flow(qm, 1.0).data - f01.data)) <= 1e-12
    assert np.max(np.abs(predict_flow(qm, -1.0).data - f0m1.data)) <= 1e-12


def test_zero_time_gives_zero_flow(rng):
    qm = fit_quadratic(FlowField(rng.normal(size=(8, 8, 2))), FlowField(rng.normal(size=(8, 8, 2))))
    assert np.all(predict_flow(qm, 0.0).data == 0.0)


def test_symmetric_flows_degenerate_to_linear(rng):
    f01 = FlowField(rng.normal(0, 5, size=(12, 12, 2)))
    qm = fit_quadratic(f01, FlowField(-f01.data))
    assert np.all(qm.half_acceleration.data == 0.0)
    for t in (0.125, 0.5, 0.875):
        assert np.max(np.abs(predict_flow(qm, t).data - predict_linear(f01, t).data)) <= 1e-12


def test_fit_rejects_size_mismatch():
    with pytest.raises(DimensionMismatchError):
        fit_quadratic(FlowField.zeros(4, 4), FlowField.zeros(4, 5))


@pytest.mark.parametrize("t", [math.nan, math.inf, 1.5, -1.25])
def test_prediction_rejects_time_outside_fitted_span(t):
    qm = fit_quadratic(FlowField.zeros(2, 2), FlowField.zeros(2, 2))
    with pytest.raises(ParameterError):
        predict_flow(qm, t)
    with pytest.raises(ParameterError):
        predict_linear(FlowField.zeros(2, 2), t)


def test_analytic_flows_give_exact_sprite_displacement():
    scene = blob_scene(v=(4.0, -1.0), a=(2.0, 1.0))
    sprite = scene.sprites[0]
    f01 = analytic_flow(scene, 0.0, 1.0)
    f0m1 = analytic_flow(scene, 0.0, -1.0)
    qm = fit_quadratic(f01, f0m1)
    support = f01.magnitude() > 0

    for k in range(1, 8):
        t = k / 8
        expected = sprite.displacement(0.0, t)
        predicted = predict_flow(qm, t).data[support]
        assert np.max(np.abs(predicted - np.array(expected))) <= 1e-9
