import pytest

from algoconcepts.graphgen import make_dataset
from algoconcepts.pipeline import traces_for

# criterion id -> (passed, detail); filled by the acceptance module
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def bfs_traces():
    ds = make_dataset("bfs", counts=(10, 1, 1), seed=0)
    return traces_for("bfs", ds.train)


@pytest.fixture(scope="session")
def coloring_traces():
    ds = make_dataset("coloring", counts=(80, 8, 8), seed=0)
    return traces_for("coloring", ds.train)


@pytest.fixture(scope="session")
def kruskal_traces():
    ds = make_dataset("kruskal", counts=(25, 3, 3), seed=0)
    return traces_for("kruskal", ds.train)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k)):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key:>2}: {detail}")
