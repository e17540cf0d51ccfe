import numpy as np
import pytest

from harnack_lab import scenario as S
from harnack_lab.operators import ConvexSet, MonotoneOperator


def all_operators(dim=2):
    """One instance of every built-in operator kind (and every set kind)."""
    e1 = np.zeros(dim)
    e1[0] = 1.0
    return {
        "zero": MonotoneOperator.zero(dim),
        "halfspace": MonotoneOperator.normal_cone(ConvexSet.halfspace(e1, -0.5)),
        "box": MonotoneOperator.normal_cone(ConvexSet.box(-np.ones(dim), 2 * np.ones(dim))),
        "ball": MonotoneOperator.normal_cone(ConvexSet.ball(0.1 * e1, 1.5)),
        "linear_psd": MonotoneOperator.linear_psd(np.diag(np.arange(1.0, dim + 1)) + 0.3 * (1 - np.eye(dim))),
        "soft": MonotoneOperator.scaled_subgradient_abs(dim, 0.7),
    }


@pytest.fixture
def rou():
    return S.reflected_ou(1)


@pytest.fixture
def rou2():
    return S.reflected_ou(2)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
