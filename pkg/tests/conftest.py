import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "wpvol",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("wpvol")

# (criterion number, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    merged = {}
    for crit, ok, detail in ACCEPTANCE:
        prev_ok, details = merged.get(crit, (True, []))
        merged[crit] = (prev_ok and ok, details + [detail])
    for crit in sorted(merged):
        ok, details = merged[crit]
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {'; '.join(details)}")


@pytest.fixture
def fresh_store():
    from wpvol.intersection import MemoStore, set_default_store

    old = set_default_store(MemoStore())
    yield
    set_default_store(old)
