import numpy as np
import pytest

from volhazard.model import MarketModel, Preferences, QuadraticCost

ACCEPTANCE = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def random_params(rng, d=2, d0=0, *, r=(0.2, 5.0), b=(-3.0, 3.0), alpha=(-3.0, 3.0),
                  beta=(0.2, 5.0)):
    prefs = Preferences(rng.uniform(*r), rng.uniform(*r))
    market = MarketModel(d, rng.uniform(*b, size=d), d0=d0)
    cost = QuadraticCost(rng.uniform(*alpha, size=d), rng.uniform(*beta, size=d))
    return prefs, market, cost


@pytest.fixture
def unit_prefs():
    return Preferences(1.0, 1.0)


@pytest.fixture
def square_market():
    return MarketModel(2, [1.0, 1.0])
