import pytest
from hypothesis import given, settings, strategies as st

from probreach.model import state_cube
from probreach.sat import SatRangeError, brute_force_sat, new_solver

from conftest import s


def satisfies(clauses, values):
    return all(any(values[abs(l)] == (l > 0) for l in c) for c in clauses)


def test_variable_range():
    solver = new_solver(2)
    solver.add_clause([1, -4])
    with pytest.raises(SatRangeError):
        solver.add_clause([5])
    with pytest.raises(SatRangeError):
        solver.solve([0])
    assert solver.new_var() == 5
    solver.add_clause([5])
    assert solver.solve()[5] is True


def test_wide_solver_accepts_all_model_vars():
    solver = new_solver(26)
    solver.add_clause(list(range(1, 53)))
    assert solver.is_sat()


def test_zero_vars_rejected():
    with pytest.raises(ValueError):
        new_solver(0)


def test_empty_clause_makes_solver_unsat():
    solver = new_solver(1)
    solver.add_clause([])
    assert solver.solve() is None


def test_model_extraction_and_query_count():
    solver = new_solver(1)
    solver.add_clause([1])
    model = solver.solve()
    assert model[1] is True and len(model) == 3
    assert solver.queries == 1


def test_contradictory_assumptions():
    solver = new_solver(1)
    assert solver.solve([1, -1]) is None
    assert solver.is_sat()


def test_chain4_queries(chain4):
    solver = new_solver(2)
    solver.add_clauses(c.lits for c in chain4.trans)
    # s(00) cannot jump to s(11)
    assert solver.solve(list(state_cube(s("00"), 2).lits) + [3, 4]) is None
    # F_1 = !(x1 & x2): the only step into bad starts at s(10)
    solver.add_clause([-1, -2])
    model = solver.solve([3, 4])
    assert (model[1], model[2]) == (True, False)
    solver.add_clause([-1, 2])
    assert solver.solve([3, 4]) is None


def test_incremental_consistency():
    solver = new_solver(3)
    solver.add_clause([1, 2])
    assert solver.is_sat([-1])
    solver.add_clause([-2])
    assert solver.solve([-1]) is None
    model = solver.solve()
    assert model[1] is True and model[2] is False


clause_st = st.lists(
    st.integers(1, 10).flatmap(lambda v: st.sampled_from([v, -v])),
    min_size=1, max_size=4,
)


@settings(max_examples=200, deadline=None)
@given(st.lists(clause_st, max_size=40), st.lists(st.integers(-10, 10).filter(bool), max_size=3))
def test_agrees_with_truth_tables(clauses, assumptions):
    solver = new_solver(5)
    solver.add_clauses(clauses)
    model = solver.solve(assumptions)
    ref = brute_force_sat(clauses + [[a] for a in assumptions], 10)
    assert (model is None) == (ref is None)
    if model is not None:
        assert satisfies(clauses, model)
        assert all(model[abs(a)] == (a > 0) for a in assumptions)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.lists(st.integers(1, 16).flatmap(lambda v: st.sampled_from([v, -v])),
                         min_size=2, max_size=3), min_size=30, max_size=80))
def test_sixteen_variables(clauses):
    solver = new_solver(8)
    solver.add_clauses(clauses)
    assert (solver.solve() is None) == (brute_force_sat(clauses, 16) is None)
