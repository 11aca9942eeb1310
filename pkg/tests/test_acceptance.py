"""The acceptance criteria at their stated tolerances and time budgets.
Each criterion prints one PASS/FAIL line, also under output capture."""

import pytest

from qlrenorm.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, capsys):
    result = run_criterion(name)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
