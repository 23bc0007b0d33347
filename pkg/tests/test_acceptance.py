"""Acceptance criteria: one PASS/FAIL line per criterion (run with -s to see them)."""

import pytest

from spinflow.verify import CRITERIA, run_criterion

_CTX: dict = {}


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"{c[0]:02d}-{c[1].replace(' ', '_')}" for c in CRITERIA])
def test_criterion(number):
    result = run_criterion(number, ctx=_CTX)
    print(result.line())
    for c in result.checks:
        print(f"    {'ok ' if c.passed else 'BAD'} {c.label}: {c.value!r} (tol {c.tol!r})")
    assert result.passed, result.line()
