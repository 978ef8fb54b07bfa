from pathlib import Path

import pytest

from listrank.toy import make_toy_collection

FIXTURES = Path(__file__).parent / "fixtures"

FINAL_GROUPS = (
    (13,),
    (14, 19),
    (3, 6, 7, 8, 9, 15),
    (1, 2, 4, 5, 20),
    (10, 11, 12, 16, 17, 18),
)


@pytest.fixture(scope="session")
def reasoning_trace() -> str:
    return (FIXTURES / "reasoning_trace.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def toy():
    return make_toy_collection()


@pytest.fixture
def toy_files(tmp_path, toy):
    return toy.write(tmp_path / "toy")


# --- acceptance reporting -------------------------------------------------
# Tests marked ``@pytest.mark.acceptance(number, title)`` get one PASS/FAIL
# line each in the terminal summary, in criterion order.

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _ACCEPTANCE[number] = (title, verdict, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"AC{number:<2} {verdict}  {title}  ({duration:.2f}s)")
