"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Run directly (``python3 tests/test_acceptance.py``) for the summary alone.
"""

import sys

import pytest

from wicklab.verify import CHECKS, DEFAULT_SEED, format_line, run_checks


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    (result,) = run_checks(DEFAULT_SEED, [number])
    with capsys.disabled():
        print("\n" + format_line(result))
    assert result.passed, format_line(result)


if __name__ == "__main__":
    results = run_checks(DEFAULT_SEED)
    for r in results:
        print(format_line(r))
    sys.exit(0 if all(r.passed for r in results) else 1)
