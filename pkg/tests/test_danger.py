from fractions import Fraction

import pytest

from probreach.danger import DangerLedger, InternalTransitionFinder, LedgerError, find_new_internal_transition
from probreach.frames import init_frames

from conftest import prop_for, s


@pytest.fixture
def ledger(chain4):
    return DangerLedger(chain4, prop_for(chain4, Fraction(1, 4)))


def test_record_and_dedup(ledger):
    assert ledger.record(s("10"), s("11"))
    assert ledger.transitions == {(s("10"), s("11")): Fraction(1, 5)}
    assert set(ledger.states) == {s("10"), s("11")}
    assert ledger.bad_members == {s("11")}
    assert not ledger.record(s("10"), s("11"))
    assert len(ledger.transitions) == 1
    assert ledger.successors[s("10")] == [s("11")]


def test_record_keeps_exact_probability(ledger):
    ledger.record(s("00"), s("10"))
    assert ledger.transitions[(s("00"), s("10"))] == Fraction(1, 2)


def test_record_rejects_impossible_edge(ledger):
    with pytest.raises(LedgerError):
        ledger.record(s("01"), s("10"))


def test_safe_exit(ledger):
    ledger.record(s("10"), s("01"), safe_exit=True)
    assert s("01") in ledger.safe and s("01") not in ledger
    ledger.record(s("10"), s("11"))
    with pytest.raises(LedgerError):
        ledger.record(s("00"), s("10"), safe_exit=True)


def test_reachable_from(ledger):
    ledger.record(s("00"), s("10"))
    ledger.record(s("10"), s("11"))
    assert ledger.reachable_from(s("00")) == [s("00"), s("10"), s("11")]
    assert ledger.reachable_from(s("01")) == []


def test_finder_walks_chain4(chain4, ledger):
    assert find_new_internal_transition(chain4, ledger) is None
    ledger.record(s("10"), s("11"))
    finder = InternalTransitionFinder(chain4, ledger)
    assert finder.find() == (s("10"), s("10"))
    ledger.record(s("10"), s("10"))
    assert finder.find() is None
    # a new source widens the search
    ledger.record(s("00"), s("10"))
    assert finder.find() is None
    assert len(ledger.transitions) == 3


def test_finder_ignores_bad_sources(chain4, ledger):
    ledger.add_state(s("11"))
    assert find_new_internal_transition(chain4, ledger) is None


def test_disjointness(chain4, ledger):
    seq = init_frames(chain4, prop_for(chain4, Fraction(1, 4)))
    assert ledger.disjointness_check(seq) == []
    ledger.record(s("10"), s("11"))
    report = ledger.disjointness_check(seq)
    assert report == ["(5) danger state s(10) lies in F_1"]
    seq.block_state(s("10"), 1)
    assert ledger.disjointness_check(seq) == []
    ledger.add_state(s("01"))
    assert ledger.disjointness_check(seq) == ["(5) danger state s(01) lies in F_1"]
    assert ledger.disjointness_check(seq, exempt=[s("01")]) == []
