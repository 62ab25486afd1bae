import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, passed, detail = results[n]
        terminalreporter.write_line(f"{n:>2}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
