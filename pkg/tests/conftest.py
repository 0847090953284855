import numpy as np
import pytest

from tsallis_robust.lattice import AdaptedProcess, Strategy

_criteria: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, name = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        prev = _criteria.get(n, (name, "PASS"))[1]
        _criteria[n] = (name, "FAIL" if "FAIL" in (prev, status) else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        name, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {name}")


def random_strategy(rng, N, c_range=(0.2, 1.5), xi_range=(0.3, 2.0)):
    c = AdaptedProcess([rng.uniform(*c_range, 2**k) for k in range(N)])
    return Strategy(c, rng.uniform(*xi_range, 2**N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
