"""The twelve acceptance criteria at their stated tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line (shown even without ``-s``).
Run ``python tests/test_acceptance.py`` for the same lines without pytest.
"""

import sys
import warnings

import pytest

from elliptical_radon.selftest import CRITERIA, format_result


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + format_result(result))
    assert result.passed, f"measured {result.measured} vs thresholds {result.thresholds}"


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    ok = True
    for n in sorted(CRITERIA):
        r = CRITERIA[n]()
        print(format_result(r), flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
