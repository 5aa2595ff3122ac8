import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swingsim import _pykernels, kernels

BACKENDS = kernels.available_backends()
compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _linear_args(w=0.3, x=-0.2, t0=0.0, t1=2.0, h=1e-3, stride=7):
    return (w, x, t0, t1, h, 0.1, 0.2, 1.5, 1.0, -0.5, 0.0, stride)


def _lagged_args(t1=1.0, tau=1e-3, stride=5):
    xi = np.array([1 / 3, 2 / 3])
    pstar = np.array([0.5, 1.0])
    i_d = pstar.copy()
    return (0.0, 0.0, 0.0, 0.0, i_d, 0.0, t1, 1e-3, 0.1, 0.05, 0.15, 1.5, 0.0, 1.0, -0.5, 0.0,
            xi, pstar, 1.0, tau, tau, stride)


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("t0,t1,h,expected", [(0, 1, 0.1, 10), (0, 1, 0.3, 4), (0, 1e-12, 1e-3, 1),
                                              (5.0, 5.3, 0.1, 3)])
def test_n_steps(t0, t1, h, expected):
    assert _pykernels.n_steps(t0, t1, h) == expected


def test_segment_lands_exactly_on_end_time():
    status, ts, ws, xs = _pykernels.rk4_linear_segment(*_linear_args(t0=0.0, t1=1.05, h=0.1, stride=3))
    assert status == 0
    assert ts[-1] == 1.05
    assert np.all(np.diff(ts) > 0)


def test_stride_sampling_includes_segment_end():
    _, ts, _, _ = _pykernels.rk4_linear_segment(*_linear_args(t1=1.0, h=0.1, stride=4))
    assert ts == pytest.approx([0.4, 0.8, 1.0])


def test_guard_reports_divergence():
    status, ts, ws, xs = _pykernels.rk4_linear_segment(2e6, 0.0, 0.0, 1.0, 1e-3, 0.1, 0.2, 1.5,
                                                       1.0, 0.0, 0.0, 10)
    assert status != 0


@compiled
@pytest.mark.parametrize("kwargs", [{}, dict(t1=3.3, h=7e-3, stride=1), dict(w=5.0, x=-3.0, stride=100)])
def test_linear_backends_bit_identical(kwargs):
    args = _linear_args(**kwargs)
    py = _pykernels.rk4_linear_segment(*args)
    cy = BACKENDS["cython"].rk4_linear_segment(*args)
    assert py[0] == cy[0]
    for a, b in zip(py[1:], cy[1:]):
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


@compiled
@pytest.mark.parametrize("tau", [0.0, 1e-3, 5e-2])
def test_lagged_backends_bit_identical(tau):
    args = _lagged_args(tau=tau)
    py = _pykernels.rk4_lagged_segment(*args)
    cy = BACKENDS["cython"].rk4_lagged_segment(*args)
    assert py[0] == cy[0]
    for a, b in zip(py[1:], cy[1:]):
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


@compiled
@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=2, max_size=3), st.floats(-1, 1))
def test_grid_backends_agree(lam, target):
    lam = np.array(lam)
    span = 2 * abs(target) + 1
    N = int(2 * span / 0.05)
    py = _pykernels.grid_exhaustive(lam, target, -span, 0.05, N)
    cy = BACKENDS["cython"].grid_exhaustive(lam, target, -span, 0.05, N)
    assert py[0] == cy[0]
    np.testing.assert_array_equal(py[1], cy[1])


def test_grid_exhaustive_brute_force():
    # independent enumeration over all grid points
    lam = np.array([1.0, 2.0, 4.0])
    target, lo, res, N = 0.5, -2.0, 0.1, 40
    best, arg = np.inf, None
    for i in range(N + 1):
        for j in range(N + 1):
            y = np.array([lo + i * res, lo + j * res])
            Y = np.append(y, target - y.sum())
            c = 0.5 * float(lam @ (Y * Y))
            if c < best - 1e-15:
                best, arg = c, (i, j)
    cost, k = _pykernels.grid_exhaustive(lam, target, lo, res, N)
    assert tuple(k) == arg
    assert cost == pytest.approx(best, rel=1e-12)


def test_forced_pure_python_backend(monkeypatch):
    import importlib

    monkeypatch.setenv("SWINGSIM_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("SWINGSIM_PURE_PYTHON")
        importlib.reload(kernels)
