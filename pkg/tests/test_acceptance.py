"""Acceptance suite: one check per criterion, each printing a single pass/fail line.

Each check enforces its own tolerance and wall-clock budget (census build
time included), see :mod:`orbcount.acceptance`.
"""

import pytest

from orbcount import acceptance

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module", autouse=True)
def shared_censuses():
    # censuses are cached across checks and dropped afterwards
    yield
    acceptance.clear_cache()


def report(capsys, result):
    with capsys.disabled():
        print("\n" + result.line())
    return result


@pytest.mark.parametrize("key", list(acceptance.CRITERIA))
def test_criterion(key, capsys):
    r = report(capsys, acceptance.CRITERIA[key]())
    assert r.passed, r.summary
    assert r.elapsed <= r.limit, f"{r.elapsed:.1f} s over the {r.limit:.0f} s budget"


@pytest.mark.parametrize("key", list(acceptance.INVARIANTS))
def test_module_invariant(key, capsys):
    r = report(capsys, acceptance.INVARIANTS[key]())
    assert r.passed, r.summary
