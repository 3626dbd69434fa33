import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

TINY_MPS = """NAME tiny
ROWS
 N obj
 L c1
COLUMNS
 MARKER 'MARKER' 'INTORG'
 x1 obj -1 c1 1
 x2 obj -1 c1 2
 MARKER 'MARKER' 'INTEND'
RHS
 rhs c1 4
BOUNDS
 UP bnd x1 3
 UP bnd x2 3
ENDATA
"""


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_mps(tmp_path):
    p = tmp_path / "tiny.mps"
    p.write_text(TINY_MPS)
    return p


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
