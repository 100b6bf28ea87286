"""Shared test plumbing: the acceptance suite records one line per
criterion here, and the terminal summary prints them all together."""

_ACCEPTANCE: list = []


def record_criterion(num: int, name: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE.append((num, name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(_ACCEPTANCE):
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:02d} {word} {name}: {detail}")
