import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swingsim.controllers import (
    closed_loop_equilibrium,
    closed_loop_rhs,
    control_signals,
    lyapunov_dissipation,
    lyapunov_value,
    make_controller,
    with_overrides,
)
from swingsim.errors import SharingVectorUnnormalized, ValidationError, ZeroGainDivision
from swingsim.network import MicrogridState

from conftest import BETA, D, GAMMA, M, XI

state_val = st.floats(-10, 10, allow_nan=False)


def test_pi_signals_example():
    cfg = make_controller("pi", GAMMA, XI, beta=BETA)
    sig = control_signals(cfg, MicrogridState(0.2, -0.1))
    assert sig.v1 == pytest.approx(-0.03)
    assert sig.v2 == pytest.approx(0.15)
    assert sig.v == pytest.approx(0.12)
    assert sig.u == 0.0
    assert sig.Upsilon == pytest.approx([0.04, 0.08])


def test_dual_pi_generator_law():
    cfg = make_controller("dual_pi", GAMMA, XI, alpha=1.0, beta=BETA)
    assert control_signals(cfg, MicrogridState(0.0, -0.2)).u == pytest.approx(0.2)


def test_beta_zero_routes_to_proportional():
    cfg = make_controller("pi", GAMMA, XI, beta=0.0)
    assert cfg.mode == "proportional" and not cfg.integrates
    assert with_overrides(make_controller("pi", GAMMA, XI, beta=BETA), beta=0.0).mode == "proportional"


def test_pi_equilibrium_values():
    cfg = make_controller("pi", GAMMA, XI, beta=BETA)
    eq = closed_loop_equilibrium(cfg, 0.5, D)
    assert eq.omega_bar == 0.0
    assert eq.chi_bar == pytest.approx(-1 / 3)
    assert eq.Upsilon_bar == pytest.approx([1 / 6, 1 / 3])


def test_proportional_equilibrium_offset():
    cfg = make_controller("proportional", GAMMA, XI)
    eq = closed_loop_equilibrium(cfg, 0.5, D)
    assert eq.omega_bar == pytest.approx(-2.5)
    assert eq.chi_bar is None


def test_dual_pi_equilibrium_ratio():
    cfg = make_controller("dual_pi", GAMMA, XI, alpha=1.0, beta=BETA)
    eq = closed_loop_equilibrium(cfg, 0.5, D)
    assert eq.u_bar_eq / eq.v_bar == pytest.approx(2 / 3, rel=1e-12)
    assert eq.u_bar_eq + eq.v_bar == pytest.approx(0.5)


def test_zero_gain_division_on_raw_pi_config():
    from swingsim.controllers import ControllerConfig

    cfg = ControllerConfig("pi", GAMMA, XI, beta=0.0)
    with pytest.raises(ZeroGainDivision):
        closed_loop_equilibrium(cfg, 0.5, D)


@pytest.mark.parametrize("kwargs", [
    dict(mode="pi", gamma=0.0, xi=XI, beta=1.0),
    dict(mode="dual_pi", gamma=0.1, xi=XI, alpha=0.0, beta=1.0),
    dict(mode="pi", gamma=0.1, xi=XI, alpha=1.0, beta=1.0),
    dict(mode="pi", gamma=0.1, xi=(1.2, -0.2), beta=1.0),
    dict(mode="bogus", gamma=0.1, xi=XI),
])
def test_invalid_controllers(kwargs):
    with pytest.raises(ValidationError):
        make_controller(**kwargs)


def test_unnormalized_xi():
    with pytest.raises(SharingVectorUnnormalized):
        make_controller("pi", GAMMA, (0.3, 0.6), beta=BETA)


def test_nonpositive_xi_override():
    cfg = make_controller("pi", GAMMA, (1.2, -0.2), beta=BETA, allow_nonpositive_xi=True)
    assert cfg.xi == (1.2, -0.2)


@pytest.mark.parametrize("mode,alpha,beta", [("pi", 0, BETA), ("dual_pi", 1.0, BETA), ("proportional", 0, 0)])
def test_equilibrium_is_fixed_point(mode, alpha, beta):
    cfg = make_controller(mode, GAMMA, XI, alpha=alpha, beta=beta)
    eq = closed_loop_equilibrium(cfg, 0.7, D, u_bar=0.2)
    x = MicrogridState(eq.omega_bar, eq.chi_bar if eq.chi_bar is not None else 0.0)
    dw, dx = closed_loop_rhs(cfg, x, 0.7, M, D, u_bar=0.2)
    assert abs(dw) < 1e-12
    if cfg.integrates:
        assert abs(dx) < 1e-12


@pytest.mark.parametrize("mode,alpha,beta", [("pi", 0, BETA), ("dual_pi", 1.0, BETA), ("proportional", 0, 0)])
@settings(max_examples=200)
@given(w=state_val, x=state_val, s=st.floats(-1, 1))
def test_dissipation_matches_chain_rule(mode, alpha, beta, w, x, s):
    # W is quadratic, so a central difference along the vector field is exact up to rounding
    cfg = make_controller(mode, GAMMA, XI, alpha=alpha, beta=beta)
    eq = closed_loop_equilibrium(cfg, s, D)
    st0 = MicrogridState(w, x)
    dw, dx = closed_loop_rhs(cfg, st0, s, M, D)
    eps = 1e-4
    Wp = lyapunov_value(cfg, MicrogridState(w + eps * dw, x + eps * dx), eq, M)
    Wm = lyapunov_value(cfg, MicrogridState(w - eps * dw, x - eps * dx), eq, M)
    fd = (Wp - Wm) / (2 * eps)
    exact = lyapunov_dissipation(cfg, st0, D, eq)
    scale = max(1.0, lyapunov_value(cfg, st0, eq, M), abs(exact))
    assert abs(fd - exact) <= 1e-9 * scale
    assert exact <= 0.0


def test_lyapunov_zero_at_equilibrium():
    cfg = make_controller("pi", GAMMA, XI, beta=BETA)
    eq = closed_loop_equilibrium(cfg, 0.5, D)
    assert lyapunov_value(cfg, MicrogridState(0.0, eq.chi_bar), eq, M) == 0.0
    assert lyapunov_value(cfg, MicrogridState(0.1, eq.chi_bar), eq, M) > 0.0


def test_xi_array():
    cfg = make_controller("pi", GAMMA, [0.25, 0.75], beta=BETA)
    assert isinstance(cfg.xi_array, np.ndarray) and cfg.xi == (0.25, 0.75)
