import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; the verdict is printed when the test finishes."""
    info = {}

    def declare(label: str):
        info["label"] = label

    yield declare
    rep = getattr(request.node, "rep_call", None)
    verdict = "PASS" if rep is not None and rep.passed else "FAIL"
    label = info.get("label", request.node.name)
    _acceptance[request.node.nodeid] = (label, verdict)
    print(f"\n[acceptance] {label}: {verdict}")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in sorted(_acceptance.values()):
        terminalreporter.write_line(f"{verdict}  {label}")
