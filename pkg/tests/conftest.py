import math
from pathlib import Path

import numpy as np
import pytest

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
CAT_LAMBDA = math.log((3 + math.sqrt(5)) / 2)
GOLDEN_ENTROPY = math.log((1 + math.sqrt(5)) / 2)

_acceptance_lines: list[str] = []


def record_criterion(number: int, label: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {label}"
    if detail:
        line += f" ({detail})"
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolate_output(monkeypatch, tmp_path):
    # keep runs/ out of the repository during tests
    monkeypatch.setenv("BDRATE_OUTPUT_DIR", str(tmp_path / "runs"))
