"""Explicit danger-state ledger and the SAT search for unrecorded internal edges."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .model import PropertySpec, SymbolicDtmc, format_state, state_cube, state_from_values, transition_probability
from .sat import SatSolver


class LedgerError(ValueError):
    pass


class DangerLedger:
    """Discovered danger states and the probability-labelled edges among them.

    ``safe`` holds exit states proven to never reach a bad state; they carry no
    outflow and are not danger states.
    """

    def __init__(self, model: SymbolicDtmc, prop: PropertySpec):
        self.model = model
        self.prop = prop
        self.states: dict[int, None] = {}
        self.bad_members: set[int] = set()
        self.transitions: dict[tuple[int, int], Fraction] = {}
        self.successors: dict[int, list[int]] = {}
        self.safe: set[int] = set()

    def __contains__(self, s: int) -> bool:
        return s in self.states

    def add_state(self, s: int) -> bool:
        if s in self.states:
            return False
        self.states[s] = None
        self.successors[s] = []
        if self.prop.is_bad(s, self.model.num_vars):
            self.bad_members.add(s)
        return True

    def is_known(self, s: int, t: int) -> bool:
        return (s, t) in self.transitions

    def record(self, s: int, t: int, safe_exit: bool = False) -> bool:
        """Insert ``s``, ``t`` and the edge ``(s, t)``; ``True`` if the edge is new.

        With ``safe_exit`` the target goes to :attr:`safe` instead of the states.
        """
        p = transition_probability(self.model, s, t)
        if p == 0:
            K = self.model.num_vars
            raise LedgerError(f"no transition {format_state(s, K)} -> {format_state(t, K)}")
        self.add_state(s)
        if safe_exit:
            if t in self.states:
                raise LedgerError(f"danger state {format_state(t, self.model.num_vars)} marked safe")
            self.safe.add(t)
        else:
            self.add_state(t)
        if self.is_known(s, t):
            return False
        self.transitions[(s, t)] = p
        self.successors[s].append(t)
        return True

    def reachable_from(self, s: int) -> list[int]:
        if s not in self.states:
            return []
        seen = {s}
        order = [s]
        for v in order:
            for t in self.successors.get(v, ()):
                if t not in seen:
                    seen.add(t)
                    order.append(t)
        return order

    def disjointness_check(self, seq, exempt: Iterable[int] = ()) -> list[str]:
        """Non-bad ledger states that still satisfy a frame ``F_i`` with ``i >= 1``."""
        K = self.model.num_vars
        skip = set(exempt)
        report = []
        for s in self.states:
            if s in self.bad_members or s in skip:
                continue
            for i in range(1, seq.k + 1):
                if seq.contains(s, i):
                    report.append(f"(5) danger state {format_state(s, K)} lies in F_{i}")
                    break
        return report


class InternalTransitionFinder:
    """Dedicated solver for ``Ledger & T & !found & Ledger'``.

    Sources range over the non-bad ledger states.  Each known edge becomes a
    permanent blocking clause; membership selectors are added per state.
    """

    def __init__(self, model: SymbolicDtmc, ledger: DangerLedger):
        self.model = model
        self.ledger = ledger
        K = model.num_vars
        self.solver = SatSolver(K)
        self.solver.add_clauses(c.lits for c in model.trans)
        self._src: dict[int, int] = {}
        self._dst: dict[int, int] = {}
        self._blocked: set[tuple[int, int]] = set()
        self._act: int | None = None
        self._act_key: tuple[int, int] | None = None

    def _selector(self, table: dict[int, int], s: int, primed: bool) -> int:
        sel = table.get(s)
        if sel is None:
            sel = table[s] = self.solver.new_var()
            for lit in state_cube(s, self.model.num_vars, primed).lits:
                self.solver.add_clause([-sel, lit])
        return sel

    def _refresh(self) -> int:
        led = self.ledger
        key = (len(led.states), len(led.bad_members))
        if self._act is not None and key == self._act_key:
            return self._act
        if self._act is not None:
            self.solver.add_clause([-self._act])
        act = self.solver.new_var()
        sources = [self._selector(self._src, s, False) for s in led.states if s not in led.bad_members]
        targets = [self._selector(self._dst, s, True) for s in led.states]
        self.solver.add_clause([-act] + sources)
        self.solver.add_clause([-act] + targets)
        self._act, self._act_key = act, key
        return act

    def _block(self) -> None:
        K = self.model.num_vars
        for edge in self.ledger.transitions:
            if edge not in self._blocked:
                self._blocked.add(edge)
                s, t = edge
                self.solver.add_clause(state_cube((s << K) | t, 2 * K).negate().lits)

    def find(self) -> tuple[int, int] | None:
        if not any(s not in self.ledger.bad_members for s in self.ledger.states):
            return None
        self._block()
        model = self.solver.solve([self._refresh()])
        if model is None:
            return None
        K = self.model.num_vars
        return state_from_values(model[1:K + 1]), state_from_values(model[K + 1:2 * K + 1])


def find_new_internal_transition(model: SymbolicDtmc, ledger: DangerLedger,
                                 finder: InternalTransitionFinder | None = None) -> tuple[int, int] | None:
    return (finder or InternalTransitionFinder(model, ledger)).find()
