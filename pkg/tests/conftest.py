import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    module = terminalreporter.config.pluginmanager.get_plugin("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        import sys
        module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
        results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number][1])
