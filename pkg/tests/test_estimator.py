import numpy as np
import pytest

from switchtrack.errors import ConfigurationError, ContractViolationError
from switchtrack.estimator import (
    EstimatorGains,
    EstimatorState,
    advance_estimate,
    estimate_deriv,
    robust_term,
)
from switchtrack.plant import PlantModel, step


def test_robust_term_sliding_example():
    gains = EstimatorGains(k2=3.0 * np.eye(3), d_bar=0.06, robust_kind="sliding")
    out = robust_term(gains, np.array([0.1, 0.0, -0.2]))
    np.testing.assert_allclose(out, [0.36, 0.0, -0.66], atol=1e-15)


def test_robust_term_zero_error_is_zero_for_both_kinds():
    sliding = EstimatorGains(k2=np.eye(2), d_bar=0.5, robust_kind="sliding")
    highgain = EstimatorGains(k2=np.eye(2), d_bar=0.5, robust_kind="highgain", epsilon=0.1)
    np.testing.assert_allclose(robust_term(sliding, np.zeros(2)), np.zeros(2), atol=0)
    np.testing.assert_allclose(robust_term(highgain, np.zeros(2)), np.zeros(2), atol=0)


def test_robust_term_highgain_example():
    gains = EstimatorGains(k2=0.6 * np.eye(4), d_bar=0.035, robust_kind="highgain", epsilon=0.1)
    out = robust_term(gains, np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [0.61225, 0.0, 0.0, 0.0], atol=1e-15)


def test_gains_validation():
    with pytest.raises(ConfigurationError):
        EstimatorGains(k2=-np.eye(2), d_bar=0.1)
    with pytest.raises(ConfigurationError):
        EstimatorGains(k2=np.array([[1.0, 0.5], [0.0, 1.0]]), d_bar=0.1)  # not symmetric
    with pytest.raises(ConfigurationError):
        EstimatorGains(k2=np.eye(2), d_bar=0.1, robust_kind="highgain")  # missing epsilon


def test_estimate_deriv_phases():
    si = PlantModel.single_integrator(2)
    est = EstimatorState(np.zeros(2))
    np.testing.assert_allclose(
        estimate_deriv("u", si, est, np.array([1.0, 0.0]), np.zeros(2)), [1.0, 0.0], atol=0
    )
    lin = PlantModel.linear(0.5 * np.eye(3))
    est = EstimatorState(np.array([0.2, 0.3, np.pi / 6]))
    out = estimate_deriv("a", lin, est, np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(out, [0.1, 0.15, np.pi / 12], atol=1e-15)
    # cancellation: vr = -v - f(xhat) gives zero rate
    v = np.array([0.4, -0.1, 0.2])
    vr = -v - 0.5 * est.x_hat
    np.testing.assert_allclose(estimate_deriv("a", lin, est, v, vr), np.zeros(3), atol=1e-16)


def test_nonzero_vr_in_denied_phase_is_a_contract_violation():
    si = PlantModel.single_integrator(2)
    est = EstimatorState(np.zeros(2))
    with pytest.raises(ContractViolationError):
        estimate_deriv("u", si, est, np.zeros(2), np.array([0.1, 0.0]))
    with pytest.raises(ContractViolationError):
        advance_estimate("u", si, est, np.zeros(2), np.array([0.1, 0.0]), dt=1e-3)


def test_advance_estimate_examples():
    si = PlantModel.single_integrator(2)
    est = EstimatorState(np.zeros(2))
    out = advance_estimate("u", si, est, np.array([1.0, 0.0]), np.zeros(2), dt=0.1)
    np.testing.assert_allclose(out.x_hat, [0.1, 0.0], atol=1e-16)

    lin = PlantModel.linear(0.5 * np.eye(3))
    est = EstimatorState(np.array([1.0, 0.0, 0.0]))
    out = advance_estimate("u", lin, est, np.zeros(3), np.zeros(3), dt=0.01)
    assert out.x_hat[0] == pytest.approx(np.exp(0.005), abs=1e-10)

    out = advance_estimate("u", lin, est, np.zeros(3), np.zeros(3), dt=0.0)
    np.testing.assert_array_equal(out.x_hat, est.x_hat)


def test_denied_phase_estimation_error_constant_for_single_integrator(rng):
    """With matched inputs and no disturbance the estimation error is frozen."""
    si = PlantModel.single_integrator(3)
    x = rng.normal(size=3)
    est = EstimatorState(x + rng.normal(size=3) * 0.1)
    e2_0 = x - est.x_hat
    dt = 1e-3
    for k in range(1000):
        v = rng.normal(size=3)  # arbitrary control, same on both sides
        x = step(si, x, v, np.zeros(3), dt)
        est = advance_estimate("u", si, est, v, np.zeros(3), dt)
    drift_err = np.linalg.norm((x - est.x_hat) - e2_0)
    assert drift_err <= 1e-10  # per second of simulated time


def test_available_phase_sliding_energy_non_increasing(rng):
    """Observer with the sliding term: V2 never grows beyond chattering slack."""
    lin = PlantModel.linear(0.5 * np.eye(3))
    gains = EstimatorGains(k2=3.0 * np.eye(3), d_bar=0.11, robust_kind="sliding")
    x = np.array([0.1, -0.2, 0.3])
    est = EstimatorState(np.array([0.0, 0.1, 0.1]))
    dt = 1e-3
    budget = gains.d_bar**2 * dt
    v2_prev = 0.5 * np.linalg.norm(x - est.x_hat) ** 2
    for _ in range(2000):
        d = rng.uniform(-0.06, 0.06, size=3)
        e2 = x - est.x_hat
        vr = robust_term(gains, e2)
        v = rng.normal(size=3) * 0.2
        x = step(lin, x, v, d, dt)
        est = advance_estimate("a", lin, est, v, vr, dt)
        v2 = 0.5 * np.linalg.norm(x - est.x_hat) ** 2
        assert v2 <= v2_prev + budget
        v2_prev = v2


def test_available_phase_highgain_decay_bound():
    """Zero disturbance, single integrator: ||e2|| decays at least at rate k2_min."""
    si = PlantModel.single_integrator(2)
    gains = EstimatorGains(k2=0.6 * np.eye(2), d_bar=0.035, robust_kind="highgain", epsilon=0.1)
    x = np.array([0.5, -0.2])
    est = EstimatorState(np.array([0.1, 0.1]))
    e2_0 = np.linalg.norm(x - est.x_hat)
    dt = 1e-3
    for k in range(1000):
        e2 = x - est.x_hat
        vr = robust_term(gains, e2)
        v = np.array([0.05, -0.01])
        x = step(si, x, v, np.zeros(2), dt)
        est = advance_estimate("a", si, est, v, vr, dt)
        t = (k + 1) * dt
        bound = e2_0 * np.exp(-gains.k2_min * t) * 1.02
        assert np.linalg.norm(x - est.x_hat) <= bound
