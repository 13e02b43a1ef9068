import numpy as np
import pytest
from hypothesis import settings

from ggmtl.graph import TaskGraph
from ggmtl.inner import TaskData

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


def complete_graph(n, weights=None):
    edges = np.array([(i, j) for i in range(n) for j in range(i + 1, n)]).reshape(-1, 2)
    w = np.ones(len(edges)) if weights is None else weights
    return TaskGraph(n, edges, w)


def random_tasks(rng, n, d, N=20, noise=1.0, W=None):
    if W is None:
        W = rng.standard_normal((n, d))
    tasks = []
    for i in range(n):
        X = rng.standard_normal((N, d))
        tasks.append(TaskData(X, X @ W[i] + noise * rng.standard_normal(N)))
    return tasks


def random_instance(seed, n=5, d=3, N=20):
    """Train/val tasks, a complete graph and edges in [0.2, 0.9]."""
    rng = np.random.default_rng(seed)
    tr = random_tasks(rng, n, d, N)
    va = random_tasks(rng, n, d, N)
    g = complete_graph(n)
    e = rng.uniform(0.2, 0.9, g.n_edges)
    return tr, va, g, e


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run regardless of capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
