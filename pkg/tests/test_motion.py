import numpy as np
import pytest

from radarrm.motion import (MotionModel, TargetTruth, accel_noise_gain,
                            cv_transition, dwna_cov, propagate_state,
                            propagate_targets)


def test_zero_state_zero_noise_is_fixed_point():
    model = MotionModel.constant_velocity(2.5, 16.0)
    out = propagate_state(np.zeros(4), model)
    assert np.array_equal(out, np.zeros(4))


def test_propagation_moves_position_by_velocity():
    model = MotionModel.constant_velocity(2.5, 16.0)
    out = propagate_state(np.array([0.0, 0.0, 10.0, -5.0]), model)
    assert np.allclose(out, [25.0, -12.5, 10.0, -5.0])


def test_transition_matrix_has_unit_determinant():
    for t0 in (0.1, 1.0, 2.5, 7.0):
        assert np.linalg.det(cv_transition(t0)) == pytest.approx(1.0)


def test_process_noise_cov_is_symmetric_psd():
    q = dwna_cov(2.5, 16.0)
    assert np.allclose(q, q.T)
    assert np.linalg.eigvalsh(q).min() >= -1e-12


def test_noise_gain_reproduces_cov():
    g = accel_noise_gain(2.5)
    assert np.allclose(16.0 * g @ g.T, dwna_cov(2.5, 16.0))


def test_monte_carlo_cov_matches_q():
    # covariance of propagated zero states is Q (norm-relative 5%)
    model = MotionModel.constant_velocity(2.5, 16.0)
    rng = np.random.default_rng(123)
    truths = [TargetTruth(id=i, state=np.zeros(4), birth_slot=0)
              for i in range(100_000)]
    out = propagate_targets(truths, model, rng)
    samples = np.array([t.state for t in out])
    cov = np.cov(samples.T, bias=True)
    err = np.linalg.norm(cov - model.q) / np.linalg.norm(model.q)
    assert err < 0.05


def test_propagate_preserves_ids_and_birth():
    model = MotionModel.constant_velocity(1.0, 1.0)
    truths = [TargetTruth(id=3, state=np.ones(4), birth_slot=17)]
    out = propagate_targets(truths, model, np.random.default_rng(0))
    assert out[0].id == 3 and out[0].birth_slot == 17


def test_invalid_model_rejected():
    with pytest.raises(ValueError):
        MotionModel.constant_velocity(0.0, 16.0)
    with pytest.raises(ValueError):
        MotionModel.constant_velocity(1.0, -1.0)
