"""Acceptance criteria at their stated tolerances.

The suite runs once per session; each criterion is then asserted in its own
test and one pass/fail line per criterion is printed.
"""

import json

import pytest

from quasibrown import acceptance
from quasibrown.io import _jsonable

NUMBERS = list(acceptance.CRITERIA) + [13]


@pytest.fixture(scope="module")
def results():
    res = acceptance.run_suite()
    return {r.number: r for r in res}


@pytest.mark.parametrize("number", NUMBERS)
def test_criterion(results, number, capsys):
    r = results[number]
    with capsys.disabled():
        print("\n" + r.line())
        print("    measured: " + json.dumps(_jsonable(r.measured)))
    assert r.passed, f"criterion {number} ({r.name}) failed: {r.measured} vs {r.tolerance}"
