import pytest

_CRITERIA = {}


@pytest.fixture
def measured(request):
    """Attach measured values to an acceptance test for the summary line."""
    def note(text):
        request.node.user_properties.append(("measured", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        notes = "; ".join(v for k, v in item.user_properties if k == "measured")
        title = marker.args[1] if len(marker.args) > 1 else ""
        # parametrized criteria pass only if every case passes
        _CRITERIA.setdefault(marker.args[0], [title, []])[1].append((report.outcome, notes))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k)):
        title, cases = _CRITERIA[key]
        status = "PASS" if all(o == "passed" for o, _ in cases) else "FAIL"
        notes = " | ".join(n for _, n in cases if n)
        line = f"{status}  criterion {key}: {title}"
        if notes:
            line += f"  [{notes}]"
        terminalreporter.write_line(line)
