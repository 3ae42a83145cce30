import sys

from hypothesis import HealthCheck, settings

# numba compiles on first use inside whichever test gets there first
settings.register_profile(
    "sdperc",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("sdperc")


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion, capture or not
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"ACCEPTANCE {name}: {status}", file=sys.__stdout__, flush=True)
