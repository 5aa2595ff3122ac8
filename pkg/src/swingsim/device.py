"""Reduced-fidelity inverter model in the voltage-aligned dq frame.

The PLL and the inner current loop are each abstracted as a first-order
tracking lag, discretised exactly (exponential update with the input held
over the step).  A time constant of zero means instantaneous tracking, which
recovers the ideal model used everywhere else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import VoltageCollapse, ValidationError

V_MIN = 0.1


@dataclass(frozen=True)
class DqFrame:
    v_d: float
    v_q: float
    i_d: float
    i_q: float


@dataclass(frozen=True)
class DeviceLags:
    tau_pll: float = 0.0
    tau_cc: float = 0.0
    v_d: float = 1.0
    omega_hat: float = 0.0
    i_d: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.tau_pll >= 0 and self.tau_cc >= 0):
            raise ValidationError("device time constants must be >= 0")
        if not self.v_d > V_MIN:
            raise VoltageCollapse(f"v_d = {self.v_d} is at or below the {V_MIN} pu floor")
        object.__setattr__(self, "i_d", tuple(float(x) for x in self.i_d))


def instantaneous_power(frame: DqFrame) -> float:
    return frame.v_d * frame.i_d + frame.v_q * frame.i_q


def reference_current(P_star, Upsilon_i, v_d: float = 1.0, v_min: float = V_MIN):
    """Direct-axis current command ``(P* + Upsilon) / v_d``; works elementwise."""
    if not v_d > v_min:
        raise VoltageCollapse(f"v_d = {v_d} is at or below the {v_min} pu floor")
    return (P_star + Upsilon_i) / v_d


def lag_factor(h: float, tau: float) -> float:
    """Fraction of the old value kept after ``h`` seconds of a first-order lag."""
    return 0.0 if tau <= 0 else math.exp(-h / tau)


def device_step(lags: DeviceLags, true_omega: float, i_star_d, h: float):
    """Advance PLL and current-loop states by ``h`` with inputs held.

    Returns ``(new_lags, delivered_power)`` where the delivered power per
    inverter is ``v_d * i_d`` (``i_q`` is pinned at zero).
    """
    if not h > 0:
        raise ValidationError("step must be > 0")
    ap = lag_factor(h, lags.tau_pll)
    ac = lag_factor(h, lags.tau_cc)
    i_star_d = np.atleast_1d(np.asarray(i_star_d, dtype=float))
    i_old = np.asarray(lags.i_d, dtype=float) if lags.i_d else np.zeros_like(i_star_d)
    omega_hat = ap * lags.omega_hat + (1.0 - ap) * true_omega
    i_new = ac * i_old + (1.0 - ac) * i_star_d
    return replace(lags, omega_hat=omega_hat, i_d=tuple(i_new)), lags.v_d * i_new


@dataclass
class GapReport:
    max_gap: float
    post_transient_gap: float
    step_size: float
    transient_window: float
    tau_pll: float
    tau_cc: float

    @property
    def relative_post_transient_gap(self) -> float:
        return self.post_transient_gap / self.step_size if self.step_size else math.inf


def fidelity_gap(scn, lags: DeviceLags, transient_window: float = 1.0) -> GapReport:
    """Compare inverter power trajectories of ideal and lagged inverters.

    ``post_transient_gap`` ignores samples less than ``transient_window``
    seconds after any input change.  ``step_size`` is the largest absolute
    load step in the scenario, used to normalise the gap.
    """
    from .simulator import integrate

    ideal = integrate(scn)
    lagged = integrate(scn, lags=lags)
    gap = np.abs(ideal.P_I - lagged.P_I).max(axis=1)
    starts = np.array([seg.t0 for seg in ideal.segments])
    since = ideal.times[:, None] - starts[None, :]
    since = np.where(since >= 0, since, np.inf).min(axis=1)
    settled = since >= transient_window
    post = float(gap[settled].max()) if settled.any() else math.nan
    totals = [0.0] + [seg.sum_delta for seg in ideal.segments]
    step = float(np.abs(np.diff(totals)).max())
    return GapReport(float(gap.max()), post, step, transient_window, lags.tau_pll, lags.tau_cc)
