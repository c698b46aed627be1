import numpy as np
import pytest

from photonlock.ifmodel import FringeModel, lock_point


@pytest.fixture
def default_lock():
    """The pulse-pair lock point at phi0 = 0: r0 = 5/8, slope = +1/8."""
    return lock_point(FringeModel.pulse_pair(), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(cid: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[cid] = f"{cid:>4}  {'PASS' if ok else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[cid])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c[1:])):
        terminalreporter.write_line(_ACCEPTANCE[cid])
