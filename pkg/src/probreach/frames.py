"""Frame sequence ``F_0..F_k``: relative induction, generalization, propagation.

Each frame is kept as an explicit clause set and mirrored into one incremental
solver: a clause ``c`` of ``F_i`` is asserted as ``(-a_i | c)`` where ``a_i`` is
the activation literal of level ``i``.  Containment ``F_i => F_{i+1}`` is kept
syntactically (``clauses(F_{i+1}) <= clauses(F_i)`` for ``i >= 1``), so frame
closure is a set-equality test.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .model import (
    Clause,
    _mask_value,
    PropertySpec,
    SymbolicDtmc,
    clause_holds,
    format_state,
    state_cube,
    state_from_values,
)
from .sat import SatSolver


class PreconditionError(ValueError):
    pass


class FrameSequence:
    def __init__(self, model: SymbolicDtmc, prop: PropertySpec, solver: SatSolver | None = None):
        self.model = model
        self.prop = prop
        K = self.num_vars = model.num_vars
        self.solver = solver or SatSolver(K)
        self.solver.add_clauses(c.lits for c in model.trans)
        self.init_state = model.init_state
        self.init_lits = list(model.init.lits)
        self.safe_clauses = prop.safe_clauses
        self.frames: list[set[Clause]] = []
        self._act: list[int] = []
        self.closed_level: int | None = None

        # bad' as a disjunction of selectors, enabled by _bad_next
        selectors = []
        for cube in prop.bad_cubes:
            b = self.solver.new_var()
            for lit in cube.lits:
                self.solver.add_clause([-b, self.prime(lit)])
            selectors.append(b)
        self._bad_next = self.solver.new_var()
        self.solver.add_clause([-self._bad_next] + selectors)
        self._bad_now: int | None = None
        self._member_sel: dict[int, int] = {}

        self._new_level(Clause([lit]) for lit in self.init_lits)
        self._new_level(self.safe_clauses)

    # -- bookkeeping ---------------------------------------------------

    @property
    def k(self) -> int:
        return len(self.frames) - 1

    def prime(self, lit: int) -> int:
        return lit + self.num_vars if lit > 0 else lit - self.num_vars

    def _new_level(self, clauses: Iterable[Clause]) -> None:
        self.frames.append(set())
        self._act.append(self.solver.new_var())
        for c in clauses:
            self._add(c, self.k)

    def _add(self, c: Clause, i: int) -> bool:
        if c in self.frames[i]:
            return False
        self.frames[i].add(c)
        self.solver.add_clause([-self._act[i]] + list(c.lits))
        return True

    def assumptions(self, i: int) -> list[int]:
        if i == 0:
            return [self._act[0]] + self.init_lits
        return [self._act[i]]

    def push_frame(self) -> None:
        """Append ``F_{k+1} = phi``."""
        self._new_level(self.safe_clauses)

    def contains(self, s: int, i: int) -> bool:
        if i == 0 and s != self.init_state:
            return False
        return all(clause_holds(c, s, self.num_vars) for c in self.frames[i])

    def implied_by_init(self, c: Clause) -> bool:
        """``I => c``; the initial state is a complete cube."""
        init = set(self.init_lits)
        return any(lit in init for lit in c.lits)

    def _split(self, model: list[bool]) -> tuple[int, int]:
        K = self.num_vars
        return state_from_values(model[1:K + 1]), state_from_values(model[K + 1:2 * K + 1])

    # -- queries -------------------------------------------------------

    def _step_out_of(self, c: Clause, i: int, assume_c: bool) -> list[bool] | None:
        """Witness for ``F_i [& c] & T & !c'`` or ``None`` when UNSAT."""
        neg_next = [-self.prime(lit) for lit in c.lits]
        if not assume_c:
            return self.solver.solve(self.assumptions(i) + neg_next)
        sel = self.solver.new_var()
        self.solver.add_clause([-sel] + list(c.lits))
        try:
            return self.solver.solve(self.assumptions(i) + [sel] + neg_next)
        finally:
            self.solver.add_clause([-sel])

    def is_inductive_relative(self, c: Clause, i: int) -> bool:
        """``I => c`` and ``F_i & c & T => c'``."""
        if not 0 <= i <= self.k:
            raise PreconditionError(f"level {i} outside 0..{self.k}")
        return self.implied_by_init(c) and self._step_out_of(c, i, True) is None

    def find_cti(self) -> tuple[int, int] | None:
        """A transition from ``F_k`` into the bad region, if one exists."""
        model = self.solver.solve(self.assumptions(self.k) + [self._bad_next])
        return None if model is None else self._split(model)

    def find_member(self, states: Sequence[int], i: int) -> int | None:
        """Some state of ``states`` that satisfies ``F_i``."""
        if not states:
            return None
        sels = []
        for s in states:
            sel = self._member_sel.get(s)
            if sel is None:
                sel = self._member_sel[s] = self.solver.new_var()
                for lit in state_cube(s, self.num_vars).lits:
                    self.solver.add_clause([-sel, lit])
            sels.append(sel)
        act = self.solver.new_var()
        self.solver.add_clause([-act] + sels)
        try:
            model = self.solver.solve(self.assumptions(i) + [act])
        finally:
            self.solver.add_clause([-act])
        return None if model is None else self._split(model)[0]

    def leak(self, i: int) -> tuple[int, int] | None:
        """A transition from ``F_i`` to a state outside ``F_i``, if any."""
        gates = []
        act = self.solver.new_var()
        for c in sorted(self.frames[i]):
            g = self.solver.new_var()
            for lit in c.lits:
                self.solver.add_clause([-act, -g, -self.prime(lit)])
            gates.append(g)
        self.solver.add_clause([-act] + gates)
        try:
            model = self.solver.solve(self.assumptions(i) + [act])
        finally:
            self.solver.add_clause([-act])
        return None if model is None else self._split(model)

    def frame_predicate(self, i: int):
        """Fast membership test for ``F_i`` against a snapshot of its clauses."""
        K = self.num_vars
        masks = [_mask_value(c.negate().lits, K) for c in self.frames[i]]
        return lambda s: all((s & m) != v for m, v in masks)

    def has_init_predecessor(self, q: int) -> bool:
        """``SAT(F_0 & T & !q & q')``."""
        if q == self.init_state:
            return False
        q_next = [self.prime(l) for l in state_cube(q, self.num_vars).lits]
        return self.solver.solve(self.assumptions(0) + q_next) is not None

    def predecessor(self, q: int, i: int) -> int | None:
        """A state of ``F_i & !q`` with a transition into ``q``."""
        model = self._step_out_of(state_cube(q, self.num_vars).negate(), i, True)
        return None if model is None else self._split(model)[0]

    def max_inductive_level(self, q: int) -> int:
        """Largest ``j <= k`` such that ``!q`` is inductive relative to ``F_j``.

        Assumes the relative-induction query already holds at level 0.
        """
        blocking = state_cube(q, self.num_vars).negate()
        j = 0
        for m in range(1, self.k + 1):
            if self._step_out_of(blocking, m, True) is not None:
                break
            j = m
        return j

    def generalize(self, q: int, i: int) -> Clause:
        """Greedy sub-clause of ``!q`` that stays inductive relative to ``F_i``.

        Literals are tried in ascending variable order; after every successful
        drop the scan restarts, until a full pass drops nothing.
        """
        lits = list(state_cube(q, self.num_vars).negate().lits)
        dropped = True
        while dropped:
            dropped = False
            for lit in lits:
                rest = [l for l in lits if l != lit]
                if not rest:
                    continue
                cand = Clause(rest)
                if self.is_inductive_relative(cand, i):
                    lits = rest
                    dropped = True
                    break
        return Clause(lits)

    # -- updates -------------------------------------------------------

    def add_clause_at(self, c: Clause, j: int) -> None:
        """Add ``c`` to ``F_0..F_{j+1}`` (capped at the frontier)."""
        if not self.implied_by_init(c):
            raise PreconditionError(f"clause {c} excludes the initial state")
        for level in range(0, min(j + 1, self.k) + 1):
            self._add(c, level)

    def block_state(self, q: int, upto: int) -> None:
        """Add ``!q`` to ``F_1..F_upto`` without any induction check."""
        c = state_cube(q, self.num_vars).negate()
        for level in range(1, upto + 1):
            self._add(c, level)

    def propagate_clauses(self) -> bool:
        """Push relatively inductive clauses forward; ``True`` on frame closure.

        Expects ``F_{k}`` to be a freshly pushed frame.
        """
        top = self.k
        for i in range(1, top):
            for c in sorted(self.frames[i] - self.frames[i + 1]):
                if self._step_out_of(c, i, False) is None:
                    self._add(c, i + 1)
        for i in range(1, top):
            if self.frames[i] == self.frames[i + 1]:
                self.closed_level = i
                return True
        return False

    # -- invariants ----------------------------------------------------

    def _bad_now_selector(self) -> int:
        if self._bad_now is None:
            selectors = []
            for cube in self.prop.bad_cubes:
                b = self.solver.new_var()
                for lit in cube.lits:
                    self.solver.add_clause([-b, lit])
                selectors.append(b)
            self._bad_now = self.solver.new_var()
            self.solver.add_clause([-self._bad_now] + selectors)
        return self._bad_now

    def check_frame_invariants(self, exempt_targets: Iterable[int] = ()) -> list[str]:
        """Report violations of the four frame invariants.

        (1) ``I => F_0``; (2) ``clauses(F_{i+1}) <= clauses(F_i)`` for
        ``1 <= i < k``; (3) ``F_i => phi``; (4) ``F_i & T => F'_{i+1}`` for
        ``1 <= i < k``, where transitions into ``exempt_targets`` (the explicit
        danger states) are allowed.
        """
        K = self.num_vars
        report = []
        for c in sorted(self.frames[0]):
            if not clause_holds(c, self.init_state, K):
                report.append(f"(1) F_0 clause {c} excludes the initial state")
        for i in range(1, self.k):
            extra = self.frames[i + 1] - self.frames[i]
            if extra:
                report.append(f"(2) F_{i + 1} has clauses missing from F_{i}: {sorted(map(str, extra))}")
        bad_now = self._bad_now_selector()
        for i in range(1, self.k + 1):
            if self.solver.solve(self.assumptions(i) + [bad_now]) is not None:
                report.append(f"(3) F_{i} intersects the bad region")
        exempt = sorted(set(exempt_targets))
        sel = self.solver.new_var()
        for d in exempt:
            self.solver.add_clause([-sel] + [-self.prime(l) for l in state_cube(d, K).lits])
        try:
            for i in range(1, self.k):
                for c in sorted(self.frames[i + 1]):
                    neg_next = [-self.prime(l) for l in c.lits]
                    model = self.solver.solve(self.assumptions(i) + [sel] + neg_next)
                    if model is not None:
                        s, t = self._split(model)
                        report.append(
                            f"(4) F_{i} & T leaves F_{i + 1} via {format_state(s, K)} -> "
                            f"{format_state(t, K)} (clause {c})")
        finally:
            self.solver.add_clause([-sel])
        return report


def init_frames(model: SymbolicDtmc, prop: PropertySpec) -> FrameSequence:
    return FrameSequence(model, prop)
