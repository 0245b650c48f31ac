CRITERIA = {}


def record_criterion(number, title, ok, detail=""):
    CRITERIA[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok, detail = CRITERIA[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
