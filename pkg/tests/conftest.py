import numpy as np
import pytest

from swingsim.controllers import make_controller
from swingsim.network import Edge, NetworkSpec, NodeSpec
from swingsim.simulator import LoadStep, Scenario

M, D, GAMMA, BETA = 0.1, 0.05, 0.15, 1.5
XI = (1 / 3, 2 / 3)

# criterion lines printed by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES = []


def two_inverter_network(M=M, D=D, n_inverters=2):
    inv = [NodeSpec.inverter(f"I{i + 1}", 0.5 * (i + 1)) for i in range(n_inverters)]
    total = sum(n.P_nom for n in inv)
    nodes = [NodeSpec.generator("G", M, D, 1.0), *inv, NodeSpec.load("L", 1.0 + total)]
    ids = [n.id for n in nodes]
    edges = [Edge(a, b, 0.12) for a, b in zip(ids, ids[1:])]
    return NetworkSpec(tuple(nodes), tuple(edges))


def step_scenario(mode="pi", beta=BETA, alpha=0.0, xi=XI, t_end=30.0, delta=0.5, step=1e-3,
                  record_stride=10, u_bar=0.0, events=None, **kw):
    cfg = make_controller(mode, GAMMA, xi, u_bar=u_bar, alpha=alpha, beta=beta)
    net = two_inverter_network(n_inverters=len(xi))
    if events is None:
        events = (LoadStep(0.0, "L", delta),)
    return Scenario(net, cfg, t_end, tuple(events), step=step, record_stride=record_stride, **kw)


def exact_linear(M, damp, k, a, x0, t):
    """Closed-form solution of ``M w' = a - damp*w - k*x, x' = w`` via eigen-decomposition."""
    A = np.array([[-damp / M, -k / M], [1.0, 0.0]])
    lam, V = np.linalg.eig(A)
    xbar = np.array([0.0, a / k])
    y = xbar + V @ (np.exp(lam * t) * np.linalg.solve(V, np.asarray(x0, float) - xbar))
    return y.real


@pytest.fixture
def pi_scenario():
    return step_scenario()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
