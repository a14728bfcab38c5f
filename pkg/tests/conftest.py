import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = "acceptance_results"


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow)")
    setattr(config, _RESULTS, {})


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when != "call" and report.outcome != "failed":
        return
    props = dict(report.user_properties)
    key = props.get("criterion")
    if key is None:
        return
    store = getattr(pytest, "_ergolab_config")
    results = getattr(store, _RESULTS)
    if key in results and results[key][0] == "FAIL":
        return
    results[key] = ("PASS" if report.passed else "FAIL", props.get("detail", ""),
                    report.duration)


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    pytest._ergolab_config = session.config


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, _RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        status, detail, dur = results[key]
        terminalreporter.write_line(f"criterion {key}: {status}  ({dur:.1f} s)  {detail}")
