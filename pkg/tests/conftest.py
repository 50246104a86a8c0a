import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qlatt.models import make_model  # noqa: E402

ACCEPTANCE: dict[int, tuple[bool, str]] = {}

# weak transverse Ising: lam * ||Phi||_lam ~ 0.39 at lam = 1
WEAK_ISING = {"J": 0.02, "h": 0.035}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def weak_ising():
    return make_model("transverse_ising", **WEAK_ISING)


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (passed, detail)
        print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}")
