import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swingsim.device import (
    DeviceLags,
    DqFrame,
    device_step,
    fidelity_gap,
    instantaneous_power,
    lag_factor,
    reference_current,
)
from swingsim.errors import ValidationError, VoltageCollapse
from swingsim.simulator import LoadStep, integrate

from conftest import step_scenario

val = st.floats(-10, 10, allow_nan=False)


def test_instantaneous_power_example():
    assert instantaneous_power(DqFrame(1.0, 0.0, 0.8, 0.3)) == 0.8
    assert instantaneous_power(DqFrame(0.9, 0.1, 1.0, 2.0)) == pytest.approx(1.1)


@given(val, val, val, val, val)
def test_power_bilinear_in_current(vd, vq, a, b, c):
    f = lambda i_d, i_q: instantaneous_power(DqFrame(vd, vq, i_d, i_q))
    assert f(a + c, b) == pytest.approx(f(a, b) + vd * c, abs=1e-9)


def test_reference_current():
    assert reference_current(1.0, 0.2, 1.0) == pytest.approx(1.2)
    np.testing.assert_allclose(reference_current(np.array([0.5, 1.0]), np.array([0.1, 0.2]), 0.5),
                               [1.2, 2.4])


@pytest.mark.parametrize("v_d", [0.1, 0.05, -1.0])
def test_voltage_collapse(v_d):
    with pytest.raises(VoltageCollapse):
        reference_current(1.0, 0.0, v_d)
    with pytest.raises(VoltageCollapse):
        DeviceLags(v_d=v_d)


def test_negative_time_constant():
    with pytest.raises(ValidationError):
        DeviceLags(tau_pll=-1e-3)


def test_device_step_half_life():
    h = 1e-3
    lags = DeviceLags(tau_pll=h / math.log(2), tau_cc=h / math.log(2), i_d=(0.0,))
    new, p = device_step(lags, 1.0, [1.0], h)
    assert new.omega_hat == pytest.approx(0.5)
    assert p == pytest.approx([0.5])


def test_device_step_zero_tau_is_ideal():
    new, p = device_step(DeviceLags(i_d=(0.3, 0.4)), 0.7, [1.0, 2.0], 1e-3)
    assert new.omega_hat == 0.7
    assert p.tolist() == [1.0, 2.0]
    assert lag_factor(1e-3, 0.0) == 0.0


def _scn():
    return step_scenario(t_end=10.0, events=(LoadStep(0.0, "L", 0.5), LoadStep(5.0, "L", 0.0)))


def test_zero_lag_reproduces_ideal_model():
    scn = _scn()
    ideal = integrate(scn)
    lagged = integrate(scn, lags=DeviceLags())
    assert np.abs(ideal.P_I - lagged.P_I).max() < 1e-12
    assert np.abs(ideal.omega - lagged.omega).max() < 1e-12
    assert fidelity_gap(scn, DeviceLags()).max_gap < 1e-12


def test_gap_shrinks_with_tau():
    scn = _scn()
    gaps = [fidelity_gap(scn, DeviceLags(t, t)).post_transient_gap for t in (4e-3, 2e-3, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2] > 0
    rep = fidelity_gap(scn, DeviceLags(1e-3, 1e-3))
    assert rep.step_size == 0.5
    assert rep.relative_post_transient_gap < 0.02


def test_lagged_run_conserves_power():
    tr = integrate(_scn(), lags=DeviceLags(2e-3, 2e-3))
    assert np.abs(tr.conservation_residual).max() < 1e-12
    assert tr.omega_hat is not None
