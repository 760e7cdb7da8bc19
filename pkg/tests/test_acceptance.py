"""Acceptance criteria 1-8; each prints one PASS/FAIL line with its numbers."""

import pytest

from fpe_sim.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
