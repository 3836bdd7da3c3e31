"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line; the lines are also
collected and echoed in an "acceptance criteria" section after the run.
"""
import pytest

from awrascle import verify

from conftest import ACCEPTANCE_LINES

NAMES = {
    "1": "transport exactness",
    "2": "heat mode",
    "3": "poisson residual",
    "4": "mass conservation",
    "5": "discrete max-min principle",
    "6": "positivity",
    "7": "picard contraction",
    "8": "uniform bound",
    "9": "offset barrier",
    "10": "manufactured solutions",
    "11": "flow map",
    "12": "momentum drift",
    "13": "formulation residual",
}


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(verify.CHECKS, key=int),
                         ids=lambda c: f"{int(c):02d}-{NAMES[c].replace(' ', '-')}")
def test_criterion(criterion):
    res = verify.CHECKS[criterion]()
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line


def test_every_criterion_is_in_a_suite():
    covered = {c for name, cs in verify.SUITES.items() if name != "all" for c in cs}
    assert covered == set(verify.CHECKS) == set(verify.SUITES["all"]) == set(NAMES)
