"""Collects per-criterion outcomes from the acceptance suite and prints them
as one PASS/FAIL line each at the end of the run."""
import re

ACCEPTANCE: dict[str, tuple[str, bool, str]] = {}


def record(label: str, title: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE[label] = (title, bool(ok), detail)
    return bool(ok)


def _order(label: str):
    m = re.match(r"(\d+)(.*)", label)
    return int(m.group(1)), m.group(2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_order):
        title, ok, detail = ACCEPTANCE[label]
        line = f"criterion {label} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
