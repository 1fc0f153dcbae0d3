import numpy as np
import pytest

from episis.graph import Graph, complete_graph, cycle_graph, path_graph, star_graph


def edge_graph():
    return Graph(2, [(0, 1)])


SMALL_GRAPHS = {
    "edge": edge_graph,
    "path3": lambda: path_graph(3),
    "triangle": lambda: complete_graph(3),
    "star4": lambda: star_graph(4),
    "k4": lambda: complete_graph(4),
    "cycle5": lambda: cycle_graph(5),
}


@pytest.fixture(params=sorted(SMALL_GRAPHS))
def small_graph(request):
    return SMALL_GRAPHS[request.param]()


def assert_graph_invariants(g):
    A = g.dense_adjacency()
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 0)
    rebuilt = {(i, int(j)) for i in range(g.n) for j in g.neighbors(i) if i < j}
    assert rebuilt == g.edge_set()
    assert np.all(g.edges[:, 0] < g.edges[:, 1]) if g.num_edges else True


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
