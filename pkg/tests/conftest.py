import zlib

import numpy as np
import pytest

from cbl.grid import make_grid
from cbl.rng import stream

SEED = 20240611


@pytest.fixture
def rng(request):
    """Philox stream keyed by (fixed seed, test node id)."""
    return stream(SEED, request.node.nodeid)


@pytest.fixture(scope="session")
def grid64():
    return make_grid(64)


@pytest.fixture(scope="session")
def grid128():
    return make_grid(128)


def sine_half(y):
    return np.sin(np.pi * (y + 1) / 2)


def crc(data: bytes) -> int:
    return zlib.crc32(data)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE
    except ImportError:
        return
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
