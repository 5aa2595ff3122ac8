"""Communication-free master-slave microgrid simulator.

A swing-equation generator sets the frequency; current-source inverters
follow it and regulate it back to nominal with a shared PI law.
"""
from .controllers import (
    ControllerConfig,
    ControlSignals,
    Equilibrium,
    closed_loop_equilibrium,
    control_signals,
    lyapunov_dissipation,
    lyapunov_value,
    make_controller,
)
from .device import DeviceLags, DqFrame, device_step, fidelity_gap, instantaneous_power, reference_current
from .kernels import BACKEND
from .network import (
    MicrogridState,
    NetworkSpec,
    NodeSpec,
    PowerFlows,
    aggregate_load_deviation,
    power_flows,
    reduced_dynamics,
    validate_network,
)
from .sharing import CostMatrix, optimal_injection, optimal_sharing, oracle_optimal_injection
from .simulator import (
    DispatchRamp,
    LoadStep,
    Scenario,
    Trajectory,
    check_lyapunov,
    integrate,
    steady_state_extract,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ControlSignals",
    "ControllerConfig",
    "CostMatrix",
    "DeviceLags",
    "DispatchRamp",
    "DqFrame",
    "Equilibrium",
    "LoadStep",
    "MicrogridState",
    "NetworkSpec",
    "NodeSpec",
    "PowerFlows",
    "Scenario",
    "Trajectory",
    "aggregate_load_deviation",
    "check_lyapunov",
    "closed_loop_equilibrium",
    "control_signals",
    "device_step",
    "fidelity_gap",
    "instantaneous_power",
    "integrate",
    "lyapunov_dissipation",
    "lyapunov_value",
    "make_controller",
    "optimal_injection",
    "optimal_sharing",
    "oracle_optimal_injection",
    "power_flows",
    "reduced_dynamics",
    "reference_current",
    "steady_state_extract",
    "validate_network",
    "__version__",
]
