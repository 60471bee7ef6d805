import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenegen.config import RunConfig  # noqa: E402
from scenegen.graph import Network  # noqa: E402


@pytest.fixture
def triangle_tail() -> Network:
    """Triangle a-b-c (weights 3, 2, 1) plus pendant c-d (weight 4)."""
    return Network(edges=[("a", "b", 3.0), ("b", "c", 2.0), ("a", "c", 1.0), ("c", "d", 4.0)])


@pytest.fixture
def dumbbell() -> Network:
    """Two triangles joined by the single bridge c-d."""
    return Network(edges=[("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0), ("c", "d", 1.0),
                          ("d", "e", 1.0), ("e", "f", 1.0), ("d", "f", 1.0)])


@pytest.fixture
def cfg(tmp_path) -> RunConfig:
    """Bundled-fixture config writing under a temp dir, with small sample sizes."""
    return RunConfig(out=str(tmp_path / "run"), bench_runs=1).validate()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, title, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
