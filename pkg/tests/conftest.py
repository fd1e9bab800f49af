import pytest

from wgcurve.meshgen import circle_domain, flower_domain, generate_fitted_mesh


@pytest.fixture(scope="session")
def circle0():
    return generate_fitted_mesh(circle_domain(), 0)


@pytest.fixture(scope="session")
def circle1():
    return generate_fitted_mesh(circle_domain(), 1)


@pytest.fixture(scope="session")
def flower0():
    return generate_fitted_mesh(flower_domain(), 0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    ran = {r.nodeid.split("::")[-1] for key in ("passed", "failed", "error")
           for r in terminalreporter.stats.get(key, []) if "test_acceptance" in r.nodeid}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        name = next((t for t in ran if t.startswith(f"test_criterion_{n}_")), None)
        if name is None:
            continue
        ok, detail = mod.RESULTS.get(n, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
