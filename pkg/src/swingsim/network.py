"""Network description, power-balance algebra and the reduced frequency dynamics.

All quantities are per-unit.  ``omega`` is always the deviation from the
nominal frequency.  Line reactances are kept as data only: the reduced model
treats the network as lossless and tightly coupled, so the only network
equation is the energy balance ``P_e + sum(P_I) - sum(P_L) = 0``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    InvalidScenario,
    MissingGenerator,
    MultipleGenerators,
    NominalImbalance,
    NonpositiveInertia,
    NonpositiveParameter,
    SharingVectorUnnormalized,
    ValidationError,
)

BALANCE_TOL = 1e-9
XI_TOL = 1e-9

NodeKind = Literal["generator", "inverter", "load"]


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind
    P_nom: float = 0.0
    M: float | None = None  # generator only
    D: float | None = None  # generator only

    @classmethod
    def generator(cls, id: str, M: float, D: float, P_nom: float) -> "NodeSpec":
        return cls(id, "generator", float(P_nom), float(M), float(D))

    @classmethod
    def inverter(cls, id: str, P_nom: float) -> "NodeSpec":
        return cls(id, "inverter", float(P_nom))

    @classmethod
    def load(cls, id: str, P_nom: float) -> "NodeSpec":
        return cls(id, "load", float(P_nom))


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    reactance: float


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "edges", tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        )

    def _of_kind(self, kind):
        return [n for n in self.nodes if n.kind == kind]

    @property
    def generator(self) -> NodeSpec:
        gens = self._of_kind("generator")
        if len(gens) != 1:
            raise MissingGenerator("network needs exactly one generator")
        return gens[0]

    @property
    def inverters(self) -> list[NodeSpec]:
        return self._of_kind("inverter")

    @property
    def loads(self) -> list[NodeSpec]:
        return self._of_kind("load")

    @property
    def n_inverters(self) -> int:
        return len(self.inverters)

    @property
    def n_loads(self) -> int:
        return len(self.loads)

    @property
    def P_I_star(self) -> np.ndarray:
        return np.array([n.P_nom for n in self.inverters], dtype=float)

    @property
    def P_L_star(self) -> np.ndarray:
        return np.array([n.P_nom for n in self.loads], dtype=float)

    def load_index(self, node_id: str) -> int:
        for i, n in enumerate(self.loads):
            if n.id == node_id:
                return i
        raise InvalidScenario(f"no load node named {node_id!r}")

    def balance_residual(self) -> float:
        return self.generator.P_nom + math.fsum(self.P_I_star) - math.fsum(self.P_L_star)


@dataclass(frozen=True)
class MicrogridState:
    omega: float = 0.0
    # integral of omega; deliberately not wrapped to [0, 2*pi)
    chi: float = 0.0


@dataclass(frozen=True)
class PowerFlows:
    P_e: float
    P_I: np.ndarray
    P_L: np.ndarray

    @property
    def residual(self) -> float:
        return self.P_e + self.P_I.sum() - self.P_L.sum()


def validate_network(spec: NetworkSpec) -> NetworkSpec:
    """Check partition, parameters, connectivity and nominal balance.

    Returns ``spec`` unchanged when every rule holds, otherwise raises the
    error naming the first violated rule.
    """
    ids = [n.id for n in spec.nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate node ids in {ids}")
    gens = [n for n in spec.nodes if n.kind == "generator"]
    if not gens:
        raise MissingGenerator("network has no generator node")
    if len(gens) > 1:
        raise MultipleGenerators(f"network has {len(gens)} generator nodes: {[g.id for g in gens]}")
    if not spec.inverters:
        raise ValidationError("network needs at least one inverter node")
    for n in spec.nodes:
        if n.kind not in ("generator", "inverter", "load"):
            raise ValidationError(f"node {n.id!r}: unknown kind {n.kind!r}")
        if not math.isfinite(n.P_nom) or n.P_nom < 0:
            raise NonpositiveParameter(f"node {n.id!r}: nominal power must be >= 0, got {n.P_nom}")
    g = gens[0]
    if g.M is None or not g.M > 0:
        raise NonpositiveInertia(f"generator {g.id!r}: M must be > 0, got {g.M}")
    if g.D is None or not g.D > 0:
        raise NonpositiveParameter(f"generator {g.id!r}: D must be > 0, got {g.D}")

    adjacency: dict[str, set[str]] = {i: set() for i in ids}
    for e in spec.edges:
        if e.a not in adjacency or e.b not in adjacency:
            raise ValidationError(f"edge ({e.a}, {e.b}) references an unknown node")
        if e.a == e.b:
            raise ValidationError(f"self-loop at node {e.a!r}")
        if not e.reactance > 0:
            raise NonpositiveParameter(f"edge ({e.a}, {e.b}): reactance must be > 0")
        adjacency[e.a].add(e.b)
        adjacency[e.b].add(e.a)
    seen = {ids[0]}
    queue = deque([ids[0]])
    while queue:
        for nb in adjacency[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    if len(seen) != len(ids):
        missing = sorted(set(ids) - seen)
        raise DisconnectedGraph(f"nodes {missing} are not reachable from {ids[0]!r}")

    residual = spec.balance_residual()
    if abs(residual) > BALANCE_TOL:
        raise NominalImbalance(residual)
    return spec


def aggregate_load_deviation(delta_L: Sequence[float]) -> float:
    """Total load deviation, the ``1^T delta_L`` term of the reduced dynamics."""
    return float(math.fsum(delta_L))


def check_sharing_vector(xi: Sequence[float]) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if abs(math.fsum(xi) - 1.0) > XI_TOL:
        raise SharingVectorUnnormalized(f"sharing vector must sum to 1, sums to {math.fsum(xi):.12g}")
    return xi


def power_flows(spec: NetworkSpec, delta_L: Sequence[float], v: float, xi: Sequence[float]) -> PowerFlows:
    xi = check_sharing_vector(xi)
    delta_L = np.asarray(delta_L, dtype=float)
    if delta_L.shape != (spec.n_loads,):
        raise ValidationError(f"expected {spec.n_loads} load deviations, got {delta_L.shape}")
    if xi.shape != (spec.n_inverters,):
        raise ValidationError(f"expected {spec.n_inverters} sharing entries, got {xi.shape}")
    P_I = spec.P_I_star + v * xi
    P_L = spec.P_L_star + delta_L
    # generator output closes the energy balance
    P_e = P_L.sum() - P_I.sum()
    return PowerFlows(float(P_e), P_I, P_L)


def reduced_dynamics(state: MicrogridState, u: float, v: float, sum_delta: float,
                     M: float, D: float) -> float:
    """d(omega)/dt of ``M w' + D w = u + v - sum(delta_L)``."""
    if not M > 0:
        raise NonpositiveInertia(f"M must be > 0, got {M}")
    return (u + v - sum_delta - D * state.omega) / M
