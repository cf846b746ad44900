"""Incremental SAT contract used by the frames, ledger and engine.

Backed by MiniSat 2.2 through ``python-sat``.  Clauses are never retracted;
temporary constraints are guarded by activation literals allocated with
:meth:`SatSolver.new_var`.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from pysat.solvers import Minisat22


class SatRangeError(ValueError):
    pass


class SatSolver:
    """A solver over ``2 * num_vars`` model variables plus auxiliaries.

    :meth:`solve` returns ``None`` (UNSAT) or a list ``model`` with ``model[v]``
    the boolean value of variable ``v`` for every allocated variable; index 0 is
    unused.
    """

    def __init__(self, num_vars: int):
        if num_vars < 1:
            raise ValueError("a solver needs at least one model variable")
        self.num_model_vars = num_vars
        self.top = 2 * num_vars
        self.queries = 0
        self._solver = Minisat22()
        self._unsat = False

    def new_var(self) -> int:
        self.top += 1
        return self.top

    def add_clause(self, lits: Iterable[int]) -> None:
        lits = list(lits)
        for lit in lits:
            if lit == 0 or abs(lit) > self.top:
                raise SatRangeError(f"literal {lit} outside 1..{self.top}")
        if not lits:
            self._unsat = True
            return
        self._solver.add_clause(lits)

    def add_clauses(self, clauses: Iterable[Iterable[int]]) -> None:
        for c in clauses:
            self.add_clause(c)

    def solve(self, assumptions: Sequence[int] = ()) -> list[bool] | None:
        self.queries += 1
        for lit in assumptions:
            if lit == 0 or abs(lit) > self.top:
                raise SatRangeError(f"assumption {lit} outside 1..{self.top}")
        if self._unsat:
            return None
        if not self._solver.solve(assumptions=list(assumptions)):
            return None
        values = [False] * (self.top + 1)
        for lit in self._solver.get_model() or ():
            if abs(lit) <= self.top:
                values[abs(lit)] = lit > 0
        return values

    def is_sat(self, assumptions: Sequence[int] = ()) -> bool:
        return self.solve(assumptions) is not None

    def close(self) -> None:
        self._solver.delete()

    def __del__(self):
        try:
            self._solver.delete()
        except Exception:
            pass


def new_solver(num_vars: int) -> SatSolver:
    return SatSolver(num_vars)


def brute_force_sat(clauses: Sequence[Sequence[int]], num_vars: int) -> list[bool] | None:
    """Truth-table reference used to cross-check the solver on small formulas."""
    for bits in range(1 << num_vars):
        values = [False] + [bool((bits >> (v - 1)) & 1) for v in range(1, num_vars + 1)]
        if all(any(values[abs(l)] == (l > 0) for l in c) for c in clauses):
            return values
    return None
