import pytest

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def verdict(request):
    """Record one pass/fail line per acceptance criterion."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(key, ok, detail):
        store[key] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(store, key=int):
        ok, detail = store[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
