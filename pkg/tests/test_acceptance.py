"""Acceptance criteria 1-10. Each case prints one PASS/FAIL line (run with ``-s`` or ``-v``)."""

import pytest

from stateredist.acceptance import CHECKS, run_check


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    res = run_check(number)
    print(res.line())
    assert res.passed, res.line()
