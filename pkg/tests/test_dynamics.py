import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tissuesim.dynamics import (
    OscillatorState,
    calibrate_force_std,
    critical_params,
    oscillator_step,
    stationary_variance,
)


def ar2_stationary_variance(tau):
    # With dt = 1 the offset obeys x[n+1] = a1 x[n] + a2 x[n-1] + f[n],
    # an AR(2) process with a closed-form variance.
    lam, k = 2 / tau, 1 / tau**2
    a1, a2 = 2 - lam - k, -(1 - lam)
    return (1 - a2) / ((1 + a2) * ((1 - a2) ** 2 - a1**2))


def test_critical_params_default_tau():
    lam, k = critical_params(10)
    assert lam == pytest.approx(0.2, abs=1e-15)
    assert k == pytest.approx(0.01, abs=1e-15)


def test_critical_params_unit():
    assert critical_params(1) == (2.0, 1.0)


@given(st.floats(min_value=1e-3, max_value=1e4))
def test_critical_damping_identity(tau):
    lam, k = critical_params(tau)
    assert lam**2 - 4 * k == pytest.approx(0.0, abs=1e-12 * lam**2)


@pytest.mark.parametrize("tau", [0, -1.0])
def test_critical_params_rejects_non_positive(tau):
    with pytest.raises(ValueError):
        critical_params(tau)


def test_fixed_point_is_exact():
    state = OscillatorState.at_rest([0.3, -2.0, 7.5], tau=10)
    nxt = oscillator_step(state, np.zeros(3), 1.0)
    np.testing.assert_array_equal(nxt.value, state.value)
    np.testing.assert_array_equal(nxt.velocity, state.velocity)


def test_one_step_by_hand():
    state = OscillatorState(np.array([4.0]), np.array([0.0]), np.array([3.0]), tau=10)
    nxt = oscillator_step(state, 0.0, 1.0)
    # a = -k * 1 = -0.01; v = -0.01; x = eq + 1 - 0.01
    assert nxt.velocity[0] == pytest.approx(-0.01, abs=1e-15)
    assert nxt.value[0] == pytest.approx(3.99, abs=1e-15)


def test_update_order_velocity_before_position():
    state = OscillatorState(np.array([0.0]), np.array([1.0]), np.array([0.0]), tau=2)
    nxt = oscillator_step(state, 0.5, 1.0)
    # lam = 1, k = 0.25: a = 0.5 - 1 - 0 = -0.5, v = 0.5, x = 0 + 0.5
    assert nxt.velocity[0] == pytest.approx(0.5)
    assert nxt.value[0] == pytest.approx(0.5)


@given(
    offset=st.floats(min_value=-100, max_value=100).filter(lambda x: abs(x) > 1e-6),
    velocity=st.floats(min_value=-10, max_value=10),
)
def test_long_run_decay(offset, velocity):
    state = OscillatorState(np.array([offset]), np.array([velocity]), np.array([0.0]), tau=10)
    initial = np.hypot(offset, 10 * velocity)
    for _ in range(200):
        state = oscillator_step(state, 0.0, 1.0)
    assert abs(state.offset[0]) < 1e-2 * initial


def test_decay_after_100_steps_from_rest():
    state = OscillatorState(np.array([1.0]), np.array([0.0]), np.array([0.0]), tau=10)
    for _ in range(100):
        state = oscillator_step(state, 0.0, 1.0)
    assert abs(state.offset[0]) < 1e-2


@pytest.mark.parametrize("tau", [2.0, 3.0, 5.0, 10.0, 40.0])
def test_energy_non_increasing(tau):
    rng = np.random.default_rng(0)
    state = OscillatorState(rng.normal(size=50), rng.normal(size=50), np.zeros(50), tau=tau)
    energy = state.energy()
    for _ in range(300):
        state = oscillator_step(state, 0.0, 1.0)
        new = state.energy()
        assert np.all(new <= energy + 1e-15)
        energy = new


def test_matches_continuous_critically_damped_solution():
    tau = 10.0
    state = OscillatorState(np.array([1.0]), np.array([0.0]), np.array([0.0]), tau=tau)
    for _ in range(10):
        state = oscillator_step(state, 0.0, 1.0)
    analytic = 2 * math.exp(-1)
    assert abs(state.value[0] - analytic) / analytic < 0.05


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        OscillatorState(np.zeros(2), np.zeros(3), np.zeros(2))
    state = OscillatorState.at_rest(np.zeros(2))
    with pytest.raises(ValueError):
        oscillator_step(state, np.zeros(3))
    with pytest.raises(ValueError):
        oscillator_step(state, 0.0, dt=0)


@pytest.mark.parametrize("tau", [3.0, 10.0, 25.0])
def test_lyapunov_matches_ar2_closed_form(tau):
    assert stationary_variance(tau) == pytest.approx(ar2_stationary_variance(tau), rel=1e-10)


def test_calibrate_zero():
    assert calibrate_force_std(0.0) == 0.0


@given(st.floats(min_value=0, max_value=1e3), st.floats(min_value=2, max_value=100))
def test_calibrate_linear(s, tau):
    assert calibrate_force_std(2 * s, tau) == pytest.approx(2 * calibrate_force_std(s, tau), rel=1e-12, abs=1e-300)


def test_calibrated_force_monte_carlo():
    # 500 independent chains x 2000 steps = 10^6 samples, after burn-in.
    target = math.pi / 30
    sigma = calibrate_force_std(target, 10, 1)
    rng = np.random.default_rng(1234)
    chains = 500
    state = OscillatorState.at_rest(np.zeros(chains), tau=10)
    samples = []
    for n in range(2200):
        state = oscillator_step(state, rng.normal(0.0, sigma, chains), 1.0)
        if n >= 200:
            samples.append(state.offset)
    std = np.std(np.concatenate(samples))
    assert abs(std - target) / target < 0.02


def test_determinism():
    def run(seed):
        rng = np.random.default_rng(seed)
        state = OscillatorState.at_rest(np.zeros(5))
        values = []
        for _ in range(100):
            state = oscillator_step(state, rng.normal(0, 0.1, 5))
            values.append(state.value.copy())
        return np.array(values)

    np.testing.assert_array_equal(run(7), run(7))


@settings(max_examples=25)
@given(st.floats(min_value=1.5, max_value=50))
def test_calibration_rejects_unstable_step(tau):
    # dt <= tau / 2 is always stable; a huge step is not.
    assert stationary_variance(tau, dt=tau / 2) > 0
    with pytest.raises(ValueError):
        stationary_variance(tau, dt=10 * tau)
