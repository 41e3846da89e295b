import numpy as np
import pytest

from nvcpt.config import parse_config
from nvcpt.selftest import shipped_config_text

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def shipped(name: str):
    return parse_config(shipped_config_text(name))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
