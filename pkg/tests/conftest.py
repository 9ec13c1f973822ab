import numpy as np
import pytest

from semiexplicit.harness import build_toy

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, text): exit criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    m = report.user_properties and dict(report.user_properties).get("acceptance")
    if m:
        _ACCEPTANCE.append((m, report.outcome))


@pytest.fixture
def criterion(request, record_property):
    mark = request.node.get_closest_marker("acceptance")
    if mark is not None:
        record_property("acceptance", f"{mark.args[0]}: {mark.args[1]}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if outcome == 'passed' else 'FAIL'}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy01():
    return build_toy(0.1)


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0.0, np.log(cond), n))
    A = (Q * w) @ Q.T
    return 0.5 * (A + A.T)
