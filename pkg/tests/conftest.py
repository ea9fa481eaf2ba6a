import time

import pytest

from qampnc.constellation import psk, qam
from qampnc.latin_squares import latin_square_bank
from qampnc.singular_fades import enumerate_singular_fades

# criterion number -> (passed, detail); filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def qam16():
    return qam(16)


@pytest.fixture(scope="session")
def fades16(qam16):
    return enumerate_singular_fades(qam16)


@pytest.fixture(scope="session")
def bank16(qam16):
    t0 = time.perf_counter()
    bank = latin_square_bank(qam16, t_max=20)
    bank.build_seconds = time.perf_counter() - t0
    return bank


@pytest.fixture(scope="session")
def bank_psk16():
    return latin_square_bank(psk(16), t_max=32)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
