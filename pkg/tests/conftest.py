"""Per-criterion PASS/FAIL summary for the acceptance suite.

Acceptance tests carry ``@pytest.mark.criterion(n)``; a criterion passes only if
every test tagged with it passed.
"""

import pytest

CRITERIA = {
    1: "example11 exactness on 21^3 (analytic and FD jets)",
    2: "example11 structure system on 11^3",
    3: "phase-function suite (c1=0.1, c2=1)",
    4: "example12 curvature, structure and alphas on 11^3",
    5: "Cartan tube isoparametric at 200 random points",
    6: "Codazzi, Weingarten, Gauss and alpha PDEs on all built-in families",
    7: "expression copy of example11 matches the built-in",
    8: "negative controls: exit codes 1 and 2",
    9: "parser round-trip, oracle agreement and error offsets",
    10: "verify runs are byte-identical",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
