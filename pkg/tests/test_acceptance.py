"""One test per acceptance criterion; each prints its PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""
import pytest

from grnswitch.acceptance import CRITERIA

SLOW = {2, 4, 9}


@pytest.mark.parametrize(
    "number",
    [pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k for k in sorted(CRITERIA)],
    ids=lambda k: f"criterion-{k:02d}",
)
def test_criterion(number):
    result = CRITERIA[number]()
    print(result.line())
    assert result.passed, result.line()
