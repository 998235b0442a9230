import pytest

from agdesign.design import Design1, Design2
from agdesign.rates import PiecewiseConstant, Weibull

# piecewise rate used in the NI/equivalence examples, extended past 1 year so
# accrual designs stay inside its knots
PIECEWISE = PiecewiseConstant([0.0, 0.4, 0.8, 1.0], [1.0, 1.25, 1.5])
PIECEWISE_LONG = PiecewiseConstant([0.0, 0.4, 0.8, 1.0, 2.0], [1.0, 1.25, 1.5, 1.5])


@pytest.fixture
def d1():
    return Design1(1.0)


@pytest.fixture
def d2():
    return Design2(0.5, 1.0)


@pytest.fixture
def weibull():
    return Weibull(1.1, 1.2)


# acceptance outcomes: criterion -> list of (part, passed, detail)
ACCEPTANCE: dict[int, list] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion}{part}: {'PASS' if passed else 'FAIL'} ({detail})")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}{': ' if name else ''}{d}" for name, _, d in parts)
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
