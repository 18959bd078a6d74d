import shutil

import pytest

from hybridrag import fixture_dir
from hybridrag.config import load_config


@pytest.fixture
def fixture_copy(tmp_path):
    """The bundled fixture copied into a temp dir, so tests can edit inputs."""
    dst = tmp_path / "fixture"
    shutil.copytree(fixture_dir(), dst)
    return dst


@pytest.fixture
def fixture_cfg(fixture_copy, tmp_path):
    return load_config(fixture_copy / "config.yaml", output_dir=str(tmp_path / "run"))


# -- acceptance summary: one PASS/FAIL line per criterion ---------------------

_ACCEPTANCE: dict[str, tuple[int, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "criterion", None)
    if item_marker is None:
        return
    number, title = item_marker
    prev = _ACCEPTANCE.get(report.nodeid, (number, title, "PASS"))[2]
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _ACCEPTANCE[report.nodeid] = (number, title, "FAIL" if failed or prev == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(_ACCEPTANCE.values()):
        terminalreporter.write_line(f"{status}  {number:>2}  {title}")
