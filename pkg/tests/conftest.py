import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scribblebench import phantom  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES.append(f"[{status}] criterion {number:2d} {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)


def random_phantom(rng: np.random.Generator, grid=(64, 64, 64), n_foreground: int = 2):
    """Render random solids, redrawing until no class is fully overwritten."""
    while True:
        spec = phantom.random_spec(rng, grid, n_foreground)
        try:
            return phantom.render(spec)
        except ValueError:
            continue


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def disk21() -> np.ndarray:
    yy, xx = np.indices((21, 21))
    return (yy - 10) ** 2 + (xx - 10) ** 2 <= 100
