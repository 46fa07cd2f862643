from importlib.resources import files

import numpy as np
import pytest

from multiplex_ltm.network import MultiplexNetwork, load_network


def bundled(name: str) -> MultiplexNetwork:
    return load_network(files("multiplex_ltm").joinpath("data", name).read_text())


@pytest.fixture(scope="session")
def worked_example():
    return bundled("worked_example.json")


@pytest.fixture(scope="session")
def six_agent_dag():
    return bundled("six_agent_dag.json")


@pytest.fixture(scope="session")
def signal_duplex():
    return bundled("signal_duplex.json")


def random_network(rng, n, m, p, acyclic=False):
    """Random multiplex network; with ``acyclic`` agent j may only sense i < j."""
    layers = []
    for _ in range(m):
        edges = []
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i == j or (acyclic and j >= i):
                    continue
                if rng.random() < p:
                    edges.append((i, j))
        layers.append(edges)
    return MultiplexNetwork.from_edge_lists(n, layers)


def random_protocols(rng, n):
    return ["AND" if rng.random() < 0.5 else "OR" for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}
DETAILS: dict[str, list[str]] = {}


@pytest.fixture
def report(request):
    """Collects detail lines that the acceptance summary prints under each criterion."""
    lines = DETAILS.setdefault(request.node.nodeid, [])

    def add(text):
        print(text)
        lines.append(str(text))

    return add


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        ACCEPTANCE[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(ACCEPTANCE.items(), key=lambda kv: kv[0].split("::")[-1]):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
        for line in DETAILS.get(nodeid, []):
            terminalreporter.write_line(f"        {line}")
