from fractions import Fraction

import pytest

from probreach.bounds import Verdict
from probreach.dice import generate_dice_model
from probreach.engine import (
    Engine,
    EngineConfig,
    LoopCheckMode,
    ResourceLimitError,
    TerminationKind,
    check,
)
from probreach.frames import FrameSequence
from probreach.fuzz import differential, fuzz_instance
from probreach.model import Clause, Cube, PropertySpec, Relation, explicit_dtmc_model, parse_model
from probreach.oracle import explicate, reach_probabilities, reach_probability

from conftest import prop_for, s

F = Fraction
LT, GE = Relation.STRICTLY_LESS, Relation.AT_LEAST


@pytest.mark.parametrize("y,rel,verdict", [
    (F(1, 4), LT, Verdict.PASS),
    (F(3, 20), LT, Verdict.FAIL),
    (F(1, 5), LT, Verdict.FAIL),
    (F(1, 5), GE, Verdict.PASS),
    (F(21, 100), GE, Verdict.FAIL),
])
def test_chain4_verdicts(chain4, y, rel, verdict):
    res = check(chain4, prop_for(chain4, y, rel))
    assert res.verdict is verdict
    assert res.l_init <= F(1, 5) <= res.u_init
    assert res.first_cti == (s("10"), s("11"))


def test_chain4_final_bounds_are_exact(chain4):
    res = check(chain4, prop_for(chain4, F(1, 4)))
    assert res.termination_kind is TerminationKind.FINAL
    assert res.l_init == res.u_init == F(1, 5)
    assert res.cti_count >= 1 and res.frames_used >= 2


def test_zero_threshold_needs_no_search(chain4):
    res = check(chain4, prop_for(chain4, F(0)))
    assert res.verdict is Verdict.FAIL
    assert res.termination_kind is TerminationKind.EARLY
    assert res.frames_used == 0


def test_init_in_bad(chain4):
    prop = PropertySpec((Cube([-1, -2]),), F(1, 2))
    res = check(chain4, prop)
    assert res.termination_kind is TerminationKind.INIT_IN_BAD
    assert res.verdict is Verdict.FAIL
    assert check(chain4, prop.with_threshold(F(1), GE)).verdict is Verdict.PASS


def test_unreachable_bad_is_trivial():
    m = explicit_dtmc_model(2, 0, {(0, 1): F(1), (1, 0): F(1), (3, 3): F(1), (2, 2): F(1)}, [Cube([1, 2])])
    res = check(m, PropertySpec(m.bad, F(1, 100)))
    assert res.verdict is Verdict.PASS
    assert res.termination_kind is TerminationKind.TRIVIAL
    assert res.l_init == res.u_init == 0
    assert res.certificate.startswith("invariant\n")


def test_first_frontier_step_on_chain4(chain4):
    eng = Engine(chain4, prop_for(chain4, F(1, 4)))
    eng.seq = FrameSequence(chain4, eng.prop)
    eng.extend_frontier()
    assert eng.cti_count == 1
    assert eng.first_cti == (s("10"), s("11"))
    assert not eng.seq.contains(s("10"), 1)
    assert (s("00"), s("10")) in eng.ledger.transitions
    assert (s("10"), s("11")) in eng.ledger.transitions


def test_remove_cti_generalizes_on_frag3(frag3):
    eng = Engine(frag3, prop_for(frag3, F(1, 2)))
    eng.seq = FrameSequence(frag3, eng.prop)
    eng.remove_cti(s("100"), 1)
    assert Clause([-1, 3]) in eng.seq.frames[1]
    assert Clause([-1, 3]) in eng.seq.frames[0]
    assert not eng.ledger.transitions


def test_deterministic(chain4):
    a = check(chain4, prop_for(chain4, F(1, 4)))
    b = check(chain4, prop_for(chain4, F(1, 4)))
    keys = ("verdict", "termination_kind", "l_init", "u_init", "frames_used", "cti_count",
            "ledger_state_count", "ledger_edge_count", "sat_query_count", "certificate")
    assert all(getattr(a, k) == getattr(b, k) for k in keys)


def test_max_frames(frag3):
    # P = 1/2 exactly needs more than one frame
    prop = prop_for(frag3, F(1, 2))
    with pytest.raises(ResourceLimitError):
        check(frag3, prop, EngineConfig(max_frames=0))


def test_dice_two_pass():
    m, p = generate_dice_model(2)
    res = check(m, p.with_threshold(F(1, 30)))
    assert res.verdict is Verdict.PASS
    assert res.l_init <= F(1, 36) <= res.u_init


@pytest.mark.parametrize("mode", list(LoopCheckMode))
@pytest.mark.parametrize("seed", range(0, 60, 3))
def test_loop_modes_agree(mode, seed):
    model, prop = fuzz_instance(seed)
    out = differential(model, prop, EngineConfig(loop_check_mode=mode, loop_check_every=2), seed)
    assert out.ok, out.problems


def test_loop_detection_modes_on_dice():
    m, p = generate_dice_model(2)
    verdicts = {mode: check(m, p.with_threshold(F(1, 36), GE), EngineConfig(loop_check_mode=mode)).verdict
                for mode in LoopCheckMode}
    assert set(verdicts.values()) == {Verdict.PASS}


def test_invariant_checking_does_not_change_results(chain4):
    ref = reach_probabilities(explicate(chain4))
    plain = check(chain4, prop_for(chain4, F(1, 4)))
    checked = check(chain4, prop_for(chain4, F(1, 4)),
                    EngineConfig(assert_invariants=True, reference_probabilities=ref))
    assert checked.invariant_checks > 0
    assert (plain.verdict, plain.l_init, plain.u_init) == (checked.verdict, checked.l_init, checked.u_init)


def test_record_bounds_trace(chain4):
    res = check(chain4, prop_for(chain4, F(1, 4)), EngineConfig(record_bounds=True))
    assert res.bound_trace
    assert res.bound_trace[-1].lower(s("00")) == F(1, 5)
    assert len(res.decisions) == len(res.bound_trace)


def test_fail_certificate_is_a_critical_subsystem(chain4):
    res = check(chain4, prop_for(chain4, F(3, 20)))
    sub = parse_model(res.certificate)
    assert reach_probability(explicate(sub)) >= F(3, 20)


@pytest.mark.parametrize("seed", range(80))
def test_certificates_on_fuzz_models(seed):
    model, prop = fuzz_instance(seed)
    res = check(model, prop)
    if res.verdict is Verdict.FAIL and prop.relation is LT and res.certificate:
        sub = parse_model(res.certificate)
        assert reach_probability(explicate(sub, prop.bad_cubes)) >= prop.threshold
    if res.verdict is Verdict.PASS and res.certificate:
        assert res.certificate.startswith("invariant\n")
