"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and echoed in the pytest terminal summary.
Run directly (``python3 tests/test_acceptance.py``) for the lines alone.
"""
import pytest

from kppstab.acceptance import CHECKS

LINES = {}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CHECKS), ids=[f"{k}-{CHECKS[k].__name__}" for k in sorted(CHECKS)])
def test_criterion(number, ctx):
    fn = CHECKS[number]
    c = fn() if number == 1 else fn(ctx)
    LINES[number] = c.line()
    print(c.line())
    assert c.passed, c.line()


if __name__ == "__main__":
    from kppstab.acceptance import run_all

    results = run_all(echo=print)
    raise SystemExit(0 if all(c.passed for c in results) else 1)
