from __future__ import annotations

import pytest

from ezheston.model import REFERENCE_CONFIG, reference_params


@pytest.fixture
def ref():
    """Market and preferences of the Heston application (T = 10, phi = 1/8)."""
    return reference_params()


@pytest.fixture
def ref_config(tmp_path):
    path = tmp_path / "ref.cfg"
    path.write_text(REFERENCE_CONFIG)
    return path


@pytest.fixture
def write_config(tmp_path):
    """Write the ref config with ``key = value`` replacements applied."""

    def write(name="custom.cfg", **changes):
        lines = []
        for line in REFERENCE_CONFIG.splitlines():
            key = line.split("=", 1)[0].strip()
            if key in changes:
                line = f"{key} = {changes.pop(key)}"
            lines.append(line)
        lines += [f"{k} = {v}" for k, v in changes.items()]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path

    return write


# ---------------------------------------------------------------------------
# Acceptance criteria: one pass/fail line per criterion in the terminal summary
# ---------------------------------------------------------------------------

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``report(number, ok, detail)`` records a criterion line and returns ``ok``."""

    def report(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        return ok

    return report


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_") or report.when != "call":
        return
    number = int(name.split("_")[2])
    if report.failed and number not in _CRITERIA:
        _CRITERIA[number] = f"criterion {number:>2}: FAIL  raised before reporting ({report.longrepr.reprcrash.message})"
    elif report.skipped:
        _CRITERIA[number] = f"criterion {number:>2}: EXCLUDED  {report.longrepr[2]}"


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
