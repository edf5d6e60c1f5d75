import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gesn.graph import Graph  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def benchmark_dir(name: str) -> Path | None:
    """Directory of a public benchmark under $GESN_DATA_DIR, if present."""
    root = os.environ.get("GESN_DATA_DIR")
    if not root:
        return None
    path = Path(root) / name
    return path if (path / "edges.tsv").is_file() else None


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    iu = np.triu_indices(n, k=1)
    keep = rng.random(iu[0].size) < p
    return Graph.ensure_undirected(n, np.column_stack([iu[0][keep], iu[1][keep]]))


@pytest.fixture
def path3():
    return Graph.ensure_undirected(3, [(0, 1), (1, 2)])


@pytest.fixture
def star4():
    return Graph.ensure_undirected(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def mini_dataset_dir():
    return DATA_DIR / "mini"
