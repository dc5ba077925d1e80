"""Acceptance suite: one line per criterion, PASS or FAIL, then the assertion.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
Criteria 13 and 14 share one parameter sweep, which dominates the runtime.
"""
import sys

import pytest

from attractlab import acceptance

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def ctx():
    return acceptance.Context(master=0, workers=1)


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, ctx, capsys):
    (res,) = acceptance.run([number], ctx)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    results = acceptance.run(report=lambda r: print(r.line(), flush=True))
    sys.exit(0 if all(r.passed for r in results) else 1)
