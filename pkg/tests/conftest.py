import numpy as np
import pytest

# acceptance verdicts, filled by test_acceptance.py and printed at the end of the session
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
    print(line + (f"  [{detail}]" if detail else ""))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
            + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, floor=0.1):
    A = rng.standard_normal((n, n))
    return A @ A.T + floor * np.eye(n)
