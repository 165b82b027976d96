import numpy as np
import pytest

from confined_elastica.curve_model import AnalyticCurve, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_circle():
    return generate(AnalyticCurve("circle", {"r": 1.0}, 2 * np.pi), 100)


@pytest.fixture(scope="session")
def trefoil():
    return generate(AnalyticCurve("torus_knot", {"p": 2, "q": 3}, 31.9), 107)


def random_spsd(rng, rank=3):
    X = rng.standard_normal((3, rank))
    return X @ X.T


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``criterion(id, ok, detail)`` records a PASS/FAIL line and asserts ``ok``."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(cid, ok, detail):
        lines.append((int(cid), f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}"))
        assert ok, detail

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines, key=lambda item: item[0]):
            terminalreporter.write_line(line)
