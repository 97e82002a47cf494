import time

import pytest

from omcool import mintime

_ACCEPTANCE: list[str] = []
_SOLUTIONS: dict = {}


def record_acceptance(number: int, name: str, ok: bool, detail: str, warn_only: bool = False) -> None:
    """Print one result line and keep it for the end-of-run summary."""
    verdict = "PASS" if ok else ("WARN" if warn_only else "FAIL")
    line = f"acceptance {number:2d} {verdict}: {name}: {detail}"
    print(line)
    _ACCEPTANCE.append(line)


def solved(G0: float, N: int, mode: str = "paper"):
    """Cached (solution, seconds) so expensive solves run once per session."""
    key = (G0, N, mode)
    if key not in _SOLUTIONS:
        start = time.perf_counter()
        sol = mintime.min_time(G0, N, mode)
        _SOLUTIONS[key] = (sol, time.perf_counter() - start)
    return _SOLUTIONS[key]


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
