"""The eleven acceptance criteria at full scale; each prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script:
``python3 tests/test_acceptance.py``.
"""

import pytest

from mmbsim.acceptance import CRITERIA, mis_and_gather


@pytest.fixture(scope="module")
def fmmb_shared():
    return mis_and_gather()


def _report(result, capsys):
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.summary


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, request, capsys):
    if number in (8, 9):  # share one set of MIS/gather runs
        result = CRITERIA[number](request.getfixturevalue("fmmb_shared"))
    else:
        result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.summary


if __name__ == "__main__":
    shared = mis_and_gather()
    results = [CRITERIA[i](shared) if i in (8, 9) else CRITERIA[i]() for i in sorted(CRITERIA)]
    for r in results:
        print(r.line())
    raise SystemExit(0 if all(r.passed for r in results) else 1)
