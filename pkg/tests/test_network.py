import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swingsim.errors import (
    DisconnectedGraph,
    MissingGenerator,
    MultipleGenerators,
    NominalImbalance,
    NonpositiveInertia,
    SharingVectorUnnormalized,
    ValidationError,
)
from swingsim.network import (
    Edge,
    MicrogridState,
    NetworkSpec,
    NodeSpec,
    aggregate_load_deviation,
    check_sharing_vector,
    power_flows,
    reduced_dynamics,
    validate_network,
)

from conftest import two_inverter_network

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_valid_network_passes():
    net = validate_network(two_inverter_network())
    assert net.n_inverters == 2 and net.n_loads == 1
    assert net.balance_residual() == 0.0
    assert net.P_I_star.tolist() == [0.5, 1.0]


def test_disconnected_graph():
    net = NetworkSpec((NodeSpec.generator("G", 0.1, 0.05, 1.0), NodeSpec.inverter("I", 1.0),
                       NodeSpec.load("L", 2.0)), (Edge("G", "I", 0.1),))
    with pytest.raises(DisconnectedGraph):
        validate_network(net)


def test_missing_and_duplicate_generator():
    with pytest.raises(MissingGenerator):
        validate_network(NetworkSpec((NodeSpec.inverter("I", 1.0), NodeSpec.load("L", 1.0)),
                                     (Edge("I", "L", 0.1),)))
    nodes = (NodeSpec.generator("G1", 0.1, 0.05, 1.0), NodeSpec.generator("G2", 0.1, 0.05, 1.0),
             NodeSpec.inverter("I", 1.0), NodeSpec.load("L", 3.0))
    with pytest.raises(MultipleGenerators):
        validate_network(NetworkSpec(nodes, (Edge("G1", "G2", 1), Edge("G2", "I", 1), Edge("I", "L", 1))))


def test_nominal_imbalance_reports_residual():
    nodes = (NodeSpec.generator("G", 0.1, 0.05, 1.0), NodeSpec.inverter("I", 1.0), NodeSpec.load("L", 2.5))
    with pytest.raises(NominalImbalance) as info:
        validate_network(NetworkSpec(nodes, (Edge("G", "I", 0.1), Edge("I", "L", 0.1))))
    assert info.value.residual == pytest.approx(-0.5)


@pytest.mark.parametrize("M", [0.0, -0.1])
def test_nonpositive_inertia(M):
    with pytest.raises(NonpositiveInertia):
        validate_network(two_inverter_network(M=M))


def test_nonpositive_damping_and_reactance():
    with pytest.raises(ValidationError):
        validate_network(two_inverter_network(D=0.0))
    net = two_inverter_network()
    bad = NetworkSpec(net.nodes, (Edge("G", "I1", 0.0),) + net.edges[1:])
    with pytest.raises(ValidationError):
        validate_network(bad)


def test_aggregate_load_deviation_is_exactly_rounded():
    assert aggregate_load_deviation([0.1] * 10) == 1.0
    assert aggregate_load_deviation([1e16, 1.0, -1e16]) == 1.0


@pytest.mark.parametrize("xi", [(0.3, 0.6), (0.5, 0.5 + 2e-9)])
def test_unnormalized_sharing_vector(xi):
    with pytest.raises(SharingVectorUnnormalized):
        check_sharing_vector(xi)


def test_sharing_vector_within_tolerance():
    check_sharing_vector((1 / 3, 2 / 3 + 5e-10))


def test_power_flows_example():
    # hand evaluation: P_I = P_I* + v*xi, P_L = P_L* + delta, P_e = sum P_L - sum P_I
    net = two_inverter_network()
    pf = power_flows(net, [0.5], 0.5, (1 / 3, 2 / 3))
    assert pf.P_I == pytest.approx([0.5 + 0.5 / 3, 1.0 + 1.0 / 3], abs=1e-15)
    assert pf.P_L == pytest.approx([3.0])
    assert pf.P_e == pytest.approx(1.0, abs=1e-15)
    assert abs(pf.residual) < 1e-12


@given(finite, finite, st.floats(0.01, 0.99))
def test_power_flow_conservation(delta, v, x1):
    pf = power_flows(two_inverter_network(), [delta], v, (x1, 1 - x1))
    assert abs(pf.P_e + pf.P_I.sum() - pf.P_L.sum()) < 1e-12 * max(1.0, abs(delta), abs(v))


def test_reduced_dynamics_example():
    # M w' = -D w with u = v = delta = 0
    assert reduced_dynamics(MicrogridState(1.0, 0.0), 0.0, 0.0, 0.0, 0.1, 0.05) == pytest.approx(-0.5)
    assert reduced_dynamics(MicrogridState(0.0, 0.0), 0.3, 0.2, 0.5, 0.1, 0.05) == 0.0


@given(finite, finite, finite, finite, finite, finite)
def test_reduced_dynamics_is_affine(w1, w2, u1, u2, v, s):
    # superposition of the affine map: f(x1) - f(x2) depends only on the state difference
    f = lambda w, u: reduced_dynamics(MicrogridState(w, 0.0), u, v, s, 0.1, 0.05)
    lhs = f(w1, u1) - f(w2, u2)
    rhs = ((u1 - u2) - 0.05 * (w1 - w2)) / 0.1
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9 * (1 + abs(w1) + abs(w2) + abs(u1) + abs(u2) + abs(v) + abs(s)) * 10)


def test_load_index_unknown_node():
    with pytest.raises(ValidationError):
        two_inverter_network().load_index("nope")


def test_arrays_are_numpy():
    net = two_inverter_network(n_inverters=3)
    assert isinstance(net.P_I_star, np.ndarray) and net.P_I_star.shape == (3,)
