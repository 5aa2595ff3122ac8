"""Event-driven fixed-step integration of the closed-loop microgrid.

The horizon is cut into segments at every event time (and at the end of
every dispatch ramp).  Each segment is integrated with classical RK4 by the
kernels in :mod:`swingsim.kernels`; inputs jump only at segment boundaries,
the state is continuous across them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels
from .controllers import ControllerConfig, closed_loop_equilibrium, validate_controller
from .device import DeviceLags, reference_current
from .errors import InvalidScenario, NonFiniteState, WindowTooLong
from .network import MicrogridState, NetworkSpec, validate_network


@dataclass(frozen=True)
class LoadStep:
    time: float
    node: str
    delta: float  # new deviation of that load, not an increment


@dataclass(frozen=True)
class DispatchRamp:
    time: float
    target: float  # new generator set point u_bar
    rate: float  # pu/s, > 0


Event = Union[LoadStep, DispatchRamp]


@dataclass(frozen=True)
class Scenario:
    network: NetworkSpec
    controller: ControllerConfig
    t_end: float
    events: tuple = ()
    step: float = 1e-3
    record_stride: int = 10
    initial_state: MicrogridState = MicrogridState()
    name: str = "scenario"
    description: str = ""
    costs: tuple[float, ...] | None = None
    device: DeviceLags | None = None
    steady_window: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.costs is not None:
            object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))


def validate_scenario(scn: Scenario) -> Scenario:
    validate_network(scn.network)
    validate_controller(scn.controller, scn.network.n_inverters)
    if not (math.isfinite(scn.t_end) and scn.t_end > 0):
        raise InvalidScenario(f"t_end must be > 0, got {scn.t_end}")
    if not (math.isfinite(scn.step) and scn.step > 0):
        raise InvalidScenario(f"integrator step must be > 0, got {scn.step}")
    if int(scn.record_stride) != scn.record_stride or scn.record_stride < 1:
        raise InvalidScenario(f"record_stride must be a positive integer, got {scn.record_stride}")
    if not scn.steady_window > 0:
        raise InvalidScenario("steady_window must be > 0")
    for name in ("omega", "chi"):
        if not math.isfinite(getattr(scn.initial_state, name)):
            raise InvalidScenario(f"initial {name} must be finite")
    last = 0.0
    for ev in scn.events:
        if not (0.0 <= ev.time <= scn.t_end):
            raise InvalidScenario(f"event at t={ev.time} lies outside [0, {scn.t_end}]")
        if ev.time < last:
            raise InvalidScenario("events must be listed in time order")
        last = ev.time
        if isinstance(ev, LoadStep):
            scn.network.load_index(ev.node)
            if not math.isfinite(ev.delta):
                raise InvalidScenario("load step deviation must be finite")
        elif isinstance(ev, DispatchRamp):
            if not (ev.rate > 0 and math.isfinite(ev.rate)):
                raise InvalidScenario(f"dispatch ramp rate must be > 0, got {ev.rate}")
            if not math.isfinite(ev.target):
                raise InvalidScenario("dispatch ramp target must be finite")
        else:
            raise InvalidScenario(f"unknown event type {type(ev).__name__}")
    return scn


@dataclass(frozen=True)
class Segment:
    """Inputs held over ``[t0, t1]``; samples ``first..last`` (inclusive).

    Sample ``first`` is the boundary state at ``t0``, recorded with the
    inputs in force *before* ``t0``.
    """
    t0: float
    t1: float
    delta_L: tuple[float, ...]
    sum_delta: float
    u_start: float
    u_rate: float
    first: int
    last: int

    def u_at(self, t):
        return self.u_start + self.u_rate * (t - self.t0)


@dataclass
class Trajectory:
    times: np.ndarray
    omega: np.ndarray
    chi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    Upsilon: np.ndarray  # (samples, n_I)
    P_e: np.ndarray
    P_I: np.ndarray  # (samples, n_I)
    P_L: np.ndarray  # (samples, n_L)
    W: np.ndarray
    Wdot_residual: np.ndarray
    sum_delta: np.ndarray
    u_bar: np.ndarray
    segments: list[Segment]
    omega_hat: np.ndarray | None = None

    def __len__(self):
        return len(self.times)

    @property
    def conservation_residual(self) -> np.ndarray:
        return self.P_e + self.P_I.sum(axis=1) - self.P_L.sum(axis=1)

    def columns(self) -> dict[str, np.ndarray]:
        """CSV columns in output order."""
        cols = {"t": self.times, "omega": self.omega, "chi": self.chi, "u": self.u,
                "v": self.v, "v1": self.v1, "v2": self.v2}
        for i in range(self.Upsilon.shape[1]):
            cols[f"upsilon_{i + 1}"] = self.Upsilon[:, i]
        cols["P_e"] = self.P_e
        for i in range(self.P_I.shape[1]):
            cols[f"P_I_{i + 1}"] = self.P_I[:, i]
        for i in range(self.P_L.shape[1]):
            cols[f"P_L_{i + 1}"] = self.P_L[:, i]
        cols["W"] = self.W
        cols["Wdot_residual"] = self.Wdot_residual
        return cols

    def state_at(self, i: int) -> MicrogridState:
        return MicrogridState(float(self.omega[i]), float(self.chi[i]))


def _equilibrium_arrays(cfg: ControllerConfig, D: float, sum_delta, u_bar):
    """Vectorised (omega_bar, chi_bar) for arrays of inputs."""
    gap = np.asarray(u_bar) - np.asarray(sum_delta)
    if cfg.mode == "proportional":
        return gap / (D + cfg.gamma), np.zeros_like(gap)
    return np.zeros_like(gap), gap / cfg.integral_gain


def _lyapunov_arrays(cfg, M, D, omega, chi, omega_bar, chi_bar, domega):
    if cfg.mode == "proportional":
        dev = omega - omega_bar
        W = 0.5 * M * dev ** 2
        Wdot = M * dev * domega
    else:
        dev = omega
        k = cfg.integral_gain
        W = 0.5 * M * omega ** 2 + 0.5 * k * (chi - chi_bar) ** 2
        Wdot = M * omega * domega + k * (chi - chi_bar) * omega
    return W, Wdot - (-(D + cfg.gamma) * dev * dev)


def _schedule(scn: Scenario):
    """Yield ``(t0, t1, delta_L, u_start, u_rate)`` for every segment."""
    net = scn.network
    delta = np.zeros(net.n_loads)
    u_cur = scn.controller.u_bar
    ramp = None
    events = list(scn.events)
    k = 0
    t = 0.0
    while True:
        while k < len(events) and events[k].time <= t:
            ev = events[k]
            if isinstance(ev, LoadStep):
                delta[net.load_index(ev.node)] = ev.delta
            else:
                ramp = (ev.target, ev.rate) if ev.target != u_cur else None
            k += 1
        if t >= scn.t_end:
            return
        t_next = scn.t_end
        if k < len(events):
            t_next = min(t_next, events[k].time)
        rate = 0.0
        if ramp is not None:
            target, speed = ramp
            rate = math.copysign(speed, target - u_cur)
            t_ramp = t + abs(target - u_cur) / speed
            t_next = min(t_next, t_ramp)
        yield t, t_next, delta.copy(), u_cur, rate
        if ramp is not None:
            if t_next >= t_ramp:
                u_cur = ramp[0]
                ramp = None
            else:
                u_cur = u_cur + rate * (t_next - t)
        t = t_next


def integrate(scn: Scenario, lags: DeviceLags | None = None) -> Trajectory:
    """Simulate ``scn``; with ``lags`` the inverters act through PLL/current lags."""
    validate_scenario(scn)
    net, cfg = scn.network, scn.controller
    gen = net.generator
    M, D = gen.M, gen.D
    xi = cfg.xi_array
    P_I_star, P_L_star = net.P_I_star, net.P_L_star
    c = 1.0 if cfg.integrates else 0.0

    w, x = scn.initial_state.omega, scn.initial_state.chi
    xG, wh = x, w
    i_d = None
    if lags is not None:
        v0 = -cfg.gamma * w - cfg.beta * x
        i_d = reference_current(P_I_star, v0 * xi, lags.v_d)

    t_parts, w_parts, x_parts = [np.array([0.0])], [np.array([w])], [np.array([x])]
    xg_parts, wh_parts = [np.array([xG])], [np.array([wh])]
    id_parts = [np.atleast_2d(i_d)] if lags is not None else []
    pre_delta = np.zeros(net.n_loads)
    delta_rows = [pre_delta]
    ubar_parts = [np.array([cfg.u_bar])]
    seg_of_sample = [np.array([0])]
    segments: list[Segment] = []
    count = 1
    for t0, t1, delta, u0, urate in _schedule(scn):
        if t1 <= t0:
            continue
        s = math.fsum(delta)
        a0 = u0 - s
        if lags is None:
            status, ts, ws, xs = kernels.rk4_linear_segment(
                w, x, t0, t1, scn.step, M, D + cfg.gamma, cfg.integral_gain, c, a0, urate,
                int(scn.record_stride))
        else:
            status, ts, ws, xs, xgs, whs, ids = kernels.rk4_lagged_segment(
                w, x, xG, wh, i_d, t0, t1, scn.step, M, D, cfg.gamma,
                0.0 if cfg.mode == "proportional" else cfg.beta, cfg.alpha, c, a0, urate,
                xi, P_I_star, lags.v_d, lags.tau_pll, lags.tau_cc, int(scn.record_stride))
        if status:
            raise NonFiniteState(
                f"state left the +/-1e6 pu envelope at t={ts[-1]:.6g} "
                f"(omega={ws[-1]:.6g}, chi={xs[-1]:.6g})")
        n = len(ts)
        segments.append(Segment(t0, t1, tuple(delta), s, u0, urate, count - 1, count - 1 + n))
        t_parts.append(ts)
        w_parts.append(ws)
        x_parts.append(xs)
        delta_rows.append(np.broadcast_to(delta, (n, net.n_loads)))
        ubar_parts.append(u0 + urate * (ts - t0))
        seg_of_sample.append(np.full(n, len(segments) - 1))
        if lags is not None:
            xg_parts.append(xgs)
            wh_parts.append(whs)
            id_parts.append(ids)
            xG, wh, i_d = xgs[-1], whs[-1], ids[-1]
        w, x = ws[-1], xs[-1]
        count += n

    times = np.concatenate(t_parts)
    omega = np.concatenate(w_parts)
    chi = np.concatenate(x_parts)
    delta_L = np.vstack(delta_rows)
    u_bar = np.concatenate(ubar_parts)
    sum_delta = np.array([math.fsum(r) for r in delta_L])

    if lags is None:
        v1 = -cfg.gamma * omega
        v2 = -cfg.beta * chi if cfg.integrates else np.zeros_like(chi)
        v = v1 + v2
        Upsilon = v[:, None] * xi[None, :]
        P_I = P_I_star[None, :] + Upsilon
        u = u_bar - cfg.alpha * chi
        omega_hat = None
    else:
        chi_G = np.concatenate(xg_parts)
        omega_hat = np.concatenate(wh_parts)
        v1 = -cfg.gamma * omega_hat
        v2 = -cfg.beta * chi if cfg.integrates else np.zeros_like(chi)
        v = v1 + v2
        P_I = lags.v_d * np.vstack(id_parts)
        Upsilon = P_I - P_I_star[None, :]
        u = u_bar - cfg.alpha * chi_G
    P_L = P_L_star[None, :] + delta_L
    P_e = P_L.sum(axis=1) - P_I.sum(axis=1)

    omega_bar, chi_bar = _equilibrium_arrays(cfg, D, sum_delta, u_bar)
    # ideal vector field, used for the analytic W' residual
    domega = (u_bar - cfg.alpha * chi + (-cfg.gamma * omega + v2) - sum_delta - D * omega) / M
    W, Wres = _lyapunov_arrays(cfg, M, D, omega, chi, omega_bar, chi_bar, domega)
    return Trajectory(times, omega, chi, u, v, v1, v2, Upsilon, P_e, P_I, P_L, W, Wres,
                      sum_delta, u_bar, segments, omega_hat)


# --- verification on trajectories -------------------------------------------------

@dataclass
class SegmentCheck:
    t0: float
    t1: float
    checked: bool
    max_increment: float = 0.0
    violations: int = 0
    fd_max_error: float = 0.0
    fd_max_bound: float = 0.0
    fd_ok: bool = True


@dataclass
class LyapunovReport:
    segments: list[SegmentCheck]

    @property
    def violations(self) -> int:
        return sum(s.violations for s in self.segments)

    @property
    def max_increment(self) -> float:
        return max((s.max_increment for s in self.segments if s.checked), default=0.0)

    @property
    def fd_ok(self) -> bool:
        return all(s.fd_ok for s in self.segments)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.fd_ok


INCREMENT_TOL = 1e-9
_EPS = np.finfo(float).eps


def check_lyapunov(traj: Trajectory, cfg: ControllerConfig, M: float, D: float) -> LyapunovReport:
    """Per-segment monotonicity of W and a central-difference check of W'.

    W is recomputed on each segment relative to that segment's equilibrium,
    starting from the boundary state.  Segments with a moving set point
    (dispatch ramps) have a moving equilibrium and are skipped.

    The central difference of W over uniformly spaced samples must match
    ``-(D+gamma)*omega**2`` within the Taylor remainder ``dt**2/6 * max|W'''|``,
    with ``W'''`` evaluated analytically from the closed-loop vector field.
    """
    out = []
    damp = D + cfg.gamma
    k = cfg.integral_gain
    c = 1.0 if cfg.integrates else 0.0
    for seg in traj.segments:
        if seg.u_rate != 0.0:
            out.append(SegmentCheck(seg.t0, seg.t1, checked=False))
            continue
        sl = slice(seg.first, seg.last + 1)
        t, w, x = traj.times[sl], traj.omega[sl], traj.chi[sl]
        eq = closed_loop_equilibrium(cfg, seg.sum_delta, D, u_bar=seg.u_start)
        wbar = eq.omega_bar
        xbar = eq.chi_bar if eq.chi_bar is not None else 0.0
        a = seg.u_start - seg.sum_delta
        dw = (a - damp * w - k * x) / M
        if cfg.mode == "proportional":
            W = 0.5 * M * (w - wbar) ** 2
            dev = w - wbar
        else:
            W = 0.5 * M * w ** 2 + 0.5 * k * (x - xbar) ** 2
            dev = w
        inc = np.diff(W)
        tol = INCREMENT_TOL * np.maximum(1.0, W[:-1])
        chk = SegmentCheck(seg.t0, seg.t1, True,
                           float(inc.max()) if inc.size else 0.0, int((inc > tol).sum()))
        dt = np.diff(t)
        if len(t) >= 3:
            h = dt[0]
            uniform = np.abs(dt - h) <= 1e-9 * h
            inner = np.nonzero(uniform[:-1] & uniform[1:])[0] + 1
            if inner.size:
                fd = (W[inner + 1] - W[inner - 1]) / (2 * h)
                exact = -damp * dev[inner] ** 2
                ddw = (-damp * dw - k * c * w) / M
                W3 = np.abs(-2.0 * damp * (dw ** 2 + dev * ddw))
                W3max = np.maximum(np.maximum(W3[inner - 1], W3[inner]), W3[inner + 1])
                # remainder bound with headroom for W''' varying inside the window,
                # plus rounding of the W differences
                bound = 1.25 * h * h / 6.0 * W3max + 8 * _EPS * np.maximum(1.0, W[inner]) / h
                err = np.abs(fd - exact)
                chk.fd_max_error = float(err.max())
                chk.fd_max_bound = float(bound.max())
                chk.fd_ok = bool((err <= bound).all())
        out.append(chk)
    return LyapunovReport(out)


@dataclass
class SteadyState:
    omega: float
    chi: float
    u: float
    v: float
    Upsilon: np.ndarray
    P_I: np.ndarray
    max_deviation: dict[str, float] = field(default_factory=dict)
    window: float = 0.0


def steady_state_extract(traj: Trajectory, window: float) -> SteadyState:
    """Means over the trailing ``window`` seconds plus the largest excursion.

    ``chi`` is the terminal value (it need not settle in proportional mode).
    """
    t_end = traj.times[-1]
    last_change = traj.segments[-1].t0 if traj.segments else 0.0
    if t_end - last_change < window - 1e-12:
        raise WindowTooLong(
            f"window {window} s exceeds the {t_end - last_change:.6g} s since the last input change")
    sel = traj.times >= t_end - window - 1e-12
    series = {"omega": traj.omega[sel], "u": traj.u[sel], "v": traj.v[sel]}
    for i in range(traj.Upsilon.shape[1]):
        series[f"upsilon_{i + 1}"] = traj.Upsilon[sel, i]
    means = {k: float(np.mean(s)) for k, s in series.items()}
    devs = {k: float(np.max(np.abs(s - means[k]))) for k, s in series.items()}
    return SteadyState(means["omega"], float(traj.chi[-1]), means["u"], means["v"],
                       traj.Upsilon[sel].mean(axis=0), traj.P_I[sel].mean(axis=0), devs, window)
