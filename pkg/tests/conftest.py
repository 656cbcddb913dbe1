_acceptance = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((report.passed, props["criterion"], props.get("summary", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for passed, label, summary in _acceptance:
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] {label}")
        if summary:
            tr.write_line(f"       {summary}")
