import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pdmsynth.data_ingest import SampleWindow

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_windows(values, bearing_ids=None, faulty=None):
    values = np.asarray(values, float)
    n = len(values)
    bearing_ids = [0] * n if bearing_ids is None else bearing_ids
    faulty = [False] * n if faulty is None else faulty
    return [SampleWindow(values[i], int(bearing_ids[i]), i, bool(faulty[i])) for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
