import contextlib
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from compliant_aug import fixtures as fx

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def humanoid():
    return fx.humanoid()


@pytest.fixture(scope="session")
def standing(humanoid):
    return fx.standing_clip(humanoid, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        c = _Criterion(number, title)
        t0 = time.perf_counter()
        ok = False
        try:
            yield c
            ok = True
        finally:
            status = "PASS" if ok else "FAIL"
            line = f"{status} criterion {number}: {title} ({time.perf_counter() - t0:.1f} s)"
            if c.detail:
                line += f" | {c.detail}"
            _ACCEPTANCE.append(line)
            print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
