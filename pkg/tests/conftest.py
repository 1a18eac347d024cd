import pytest

from varexp_sde import ModelSpec, constant_coefficient, constant_exponent, remark1_exponent


@pytest.fixture(scope="session")
def one():
    return constant_exponent(1.0)


@pytest.fixture(scope="session")
def r1():
    return remark1_exponent()


@pytest.fixture(scope="session")
def gbm(one):
    return ModelSpec(one, one, constant_coefficient(0.05), constant_coefficient(0.2), 1.0, 1.0)


@pytest.fixture(scope="session")
def remark1_model(r1):
    return ModelSpec(r1, r1, constant_coefficient(1.0), constant_coefficient(1.0), 1.0, 1.0)


ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def accept(request):
    """Record one acceptance line; returns the flag so the test can assert it."""
    def record(label: str, ok: bool, detail: str = "") -> bool:
        ok = bool(ok)
        line = f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append((label, ok, detail))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{label:<15} {'PASS' if ok else 'FAIL'}  {detail}")
