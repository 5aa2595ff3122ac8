"""Controller laws, closed-loop equilibria and Lyapunov functions.

Three modes share the integrator ``chi' = omega``:

``pi``
    generator input fixed at ``u_bar``; inverters ``v = -gamma*omega - beta*chi``.
``proportional``
    ``beta = 0``; inverters ``v = -gamma*omega`` and ``chi`` is not integrated.
``dual_pi``
    generator ``u = u_bar - alpha*chi`` plus the inverter PI law.  With
    ``u_bar = 0`` (the default) this is the pure integral generator law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .errors import ValidationError, ZeroGainDivision
from .network import MicrogridState, check_sharing_vector

Mode = Literal["pi", "proportional", "dual_pi"]
MODES = ("pi", "proportional", "dual_pi")


@dataclass(frozen=True)
class ControllerConfig:
    mode: Mode
    gamma: float
    xi: tuple[float, ...]
    u_bar: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    allow_nonpositive_xi: bool = False

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(x) for x in self.xi))

    @property
    def xi_array(self) -> np.ndarray:
        return np.array(self.xi)

    @property
    def integral_gain(self) -> float:
        """Total gain on chi seen by the swing equation."""
        if self.mode == "proportional":
            return 0.0
        if self.mode == "dual_pi":
            return self.alpha + self.beta
        return self.beta

    @property
    def integrates(self) -> bool:
        return self.mode != "proportional"


def make_controller(mode: str, gamma: float, xi: Sequence[float], u_bar: float = 0.0,
                    alpha: float = 0.0, beta: float = 0.0,
                    allow_nonpositive_xi: bool = False) -> ControllerConfig:
    """Build and validate a config; ``pi`` with ``beta == 0`` becomes ``proportional``."""
    if mode == "pi" and beta == 0:
        mode = "proportional"
    cfg = ControllerConfig(mode, gamma, tuple(xi), u_bar, alpha, beta, allow_nonpositive_xi)
    return validate_controller(cfg)


def validate_controller(cfg: ControllerConfig, n_inverters: int | None = None) -> ControllerConfig:
    if cfg.mode not in MODES:
        raise ValidationError(f"unknown controller mode {cfg.mode!r}; expected one of {MODES}")
    for name in ("gamma", "alpha", "beta", "u_bar"):
        if not math.isfinite(getattr(cfg, name)):
            raise ValidationError(f"{name} must be finite")
    if not cfg.gamma > 0:
        raise ValidationError(f"gamma must be > 0, got {cfg.gamma}")
    if cfg.alpha < 0 or cfg.beta < 0:
        raise ValidationError("alpha and beta must be >= 0")
    if cfg.mode == "pi":
        if not cfg.beta > 0:
            raise ZeroGainDivision("pi mode needs beta > 0 (use proportional mode for beta = 0)")
        if cfg.alpha != 0:
            raise ValidationError("pi mode keeps the generator input constant; alpha must be 0")
    elif cfg.mode == "proportional":
        if cfg.alpha != 0 or cfg.beta != 0:
            raise ValidationError("proportional mode requires alpha = beta = 0")
    elif not (cfg.alpha > 0 and cfg.beta > 0):
        raise ValidationError("dual_pi mode requires alpha > 0 and beta > 0")
    check_sharing_vector(cfg.xi)
    if not cfg.allow_nonpositive_xi and any(x <= 0 for x in cfg.xi):
        raise ValidationError(
            f"sharing vector entries must be > 0 (got {cfg.xi}); set allow_nonpositive_xi to override"
        )
    if n_inverters is not None and len(cfg.xi) != n_inverters:
        raise ValidationError(f"xi has {len(cfg.xi)} entries but the network has {n_inverters} inverters")
    return cfg


@dataclass(frozen=True)
class ControlSignals:
    u: float
    v: float
    v1: float
    v2: float
    Upsilon: np.ndarray


@dataclass(frozen=True)
class Equilibrium:
    omega_bar: float
    chi_bar: float | None  # undefined in proportional mode
    u_bar_eq: float
    v_bar: float
    Upsilon_bar: np.ndarray


def control_signals(cfg: ControllerConfig, state: MicrogridState, u_bar: float | None = None) -> ControlSignals:
    """Evaluate the controller at ``state``.

    ``u_bar`` overrides the configured set point (used while a dispatch
    ramp is in progress).
    """
    ub = cfg.u_bar if u_bar is None else u_bar
    v1 = -cfg.gamma * state.omega
    v2 = 0.0 if cfg.mode == "proportional" else -cfg.beta * state.chi
    u = ub - cfg.alpha * state.chi if cfg.mode == "dual_pi" else ub
    v = v1 + v2
    return ControlSignals(u, v, v1, v2, v * cfg.xi_array)


def closed_loop_equilibrium(cfg: ControllerConfig, sum_delta: float, D: float,
                            u_bar: float | None = None) -> Equilibrium:
    ub = cfg.u_bar if u_bar is None else u_bar
    xi = cfg.xi_array
    if cfg.mode == "pi":
        if cfg.beta == 0:
            raise ZeroGainDivision("beta = 0 in pi mode; the equilibrium chi is undefined")
        chi = (ub - sum_delta) / cfg.beta
        return Equilibrium(0.0, chi, ub, sum_delta - ub, -xi * (ub - sum_delta))
    if cfg.mode == "proportional":
        omega = (ub - sum_delta) / (D + cfg.gamma)
        return Equilibrium(omega, None, ub, -cfg.gamma * omega, -xi * cfg.gamma * omega)
    k = cfg.alpha + cfg.beta
    if k == 0:
        raise ZeroGainDivision("alpha + beta = 0 in dual_pi mode")
    chi = (ub - sum_delta) / k
    v = -cfg.beta * chi
    return Equilibrium(0.0, chi, ub - cfg.alpha * chi, v, v * xi)


def closed_loop_rhs(cfg: ControllerConfig, state: MicrogridState, sum_delta: float, M: float,
                    D: float, u_bar: float | None = None) -> tuple[float, float]:
    """Closed-loop vector field ``(omega', chi')``."""
    sig = control_signals(cfg, state, u_bar)
    domega = (sig.u + sig.v - sum_delta - D * state.omega) / M
    return domega, (state.omega if cfg.integrates else 0.0)


def lyapunov_value(cfg: ControllerConfig, state: MicrogridState, eq: Equilibrium, M: float) -> float:
    if cfg.mode == "proportional":
        return 0.5 * M * (state.omega - eq.omega_bar) ** 2
    return 0.5 * M * state.omega ** 2 + 0.5 * cfg.integral_gain * (state.chi - eq.chi_bar) ** 2


def lyapunov_dissipation(cfg: ControllerConfig, state: MicrogridState, D: float,
                         eq: Equilibrium | None = None) -> float:
    """Analytic W' along trajectories: ``-(D + gamma) * omega**2``.

    In proportional mode the deviation is measured from ``eq.omega_bar``
    (zero when ``eq`` is omitted).
    """
    dev = state.omega
    if cfg.mode == "proportional" and eq is not None:
        dev = state.omega - eq.omega_bar
    return -(D + cfg.gamma) * dev * dev


def with_overrides(cfg: ControllerConfig, **changes) -> ControllerConfig:
    """Return a validated copy with some fields replaced (beta=0 routes pi to proportional)."""
    new = replace(cfg, **changes)
    if new.mode == "pi" and new.beta == 0:
        new = replace(new, mode="proportional")
    return validate_controller(new)
