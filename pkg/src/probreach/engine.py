"""The main checking loop: frontier extension, CTI removal, propagation and the
post-closure search that completes the danger-state equations.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .bounds import BoundSystem, BoundsSolution, Decision, Verdict, check_monotonicity, check_sandwich, decide
from .danger import DangerLedger, InternalTransitionFinder
from .frames import FrameSequence
from .model import PropertySpec, SymbolicDtmc, explicit_dtmc_model, format_state, serialize_model, state_cube
from .sat import SatSolver


class LoopCheckMode(enum.Enum):
    EVERY_ITERATION = "every"
    EVERY_N = "every-n"
    AFTER_CLOSURE_ONLY = "after-closure"


class TerminationKind(enum.Enum):
    EARLY = "Early"
    FINAL = "Final"
    INIT_IN_BAD = "InitInBad"
    TRIVIAL = "Trivial"


class EngineError(RuntimeError):
    """Internal inconsistency; never expected on a valid model."""


class ResourceLimitError(RuntimeError):
    pass


class InvariantViolation(AssertionError):
    def __init__(self, report: list[str], where: str = ""):
        self.report = report
        head = f"invariant violation{' ' + where if where else ''}"
        super().__init__(head + ":\n  " + "\n  ".join(report))


@dataclass
class EngineConfig:
    loop_check_mode: LoopCheckMode = LoopCheckMode.AFTER_CLOSURE_ONLY
    loop_check_every: int = 1
    assert_invariants: bool = False
    max_frames: int | None = None
    record_bounds: bool = False
    # exact per-state probabilities, enables the sandwich checks
    reference_probabilities: Mapping[int, Fraction] | None = None


@dataclass
class CheckResult:
    verdict: Verdict
    termination_kind: TerminationKind
    l_init: Fraction
    u_init: Fraction
    frames_used: int = 0
    cti_count: int = 0
    ledger_state_count: int = 0
    ledger_edge_count: int = 0
    sat_query_count: int = 0
    first_cti: tuple[int, int] | None = None
    certificate: str | None = None
    decisions: list[Decision] = field(default_factory=list)
    bound_trace: list[BoundsSolution] = field(default_factory=list)
    invariant_checks: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


class _Decided(Exception):
    def __init__(self, decision: Decision, kind: TerminationKind):
        self.decision = decision
        self.kind = kind


class Engine:
    def __init__(self, model: SymbolicDtmc, prop: PropertySpec, cfg: EngineConfig | None = None):
        if prop.threshold is None:
            raise ValueError("property has no threshold")
        self.model = model
        self.prop = prop
        self.cfg = cfg or EngineConfig()
        self.K = model.num_vars
        self.init = model.init_state
        self.seq: FrameSequence | None = None
        self.ledger = DangerLedger(model, prop)
        self.bounds = BoundSystem(lambda s: prop.is_bad(s, self.K))
        self.cti_count = 0
        self.first_cti: tuple[int, int] | None = None
        self.decisions: list[Decision] = []
        self.trace: list[BoundsSolution] = []
        self.invariant_checks = 0
        self._final_phase = False
        self._closed_level: int | None = None
        self._solvers: list[SatSolver] = []
        self._last_snapshot: BoundsSolution | None = None
        self._finder: InternalTransitionFinder | None = None
        self._tick = itertools.count()

    # -- bookkeeping -----------------------------------------------------

    def _register(self, s: int, t: int, safe_exit: bool = False) -> None:
        if not self.ledger.record(s, t, safe_exit):
            return
        if safe_exit and t not in self.bounds:
            self.bounds.mark_safe(t)
        self.bounds.register_transition(s, t, self.ledger.transitions[(s, t)])
        self._update()

    def _update(self) -> None:
        if self.init not in self.bounds:
            return
        if self.cfg.record_bounds:
            sol = self.bounds.solve()
            self.trace.append(sol)
        else:
            sol = self.bounds.solve([self.init])
        if self.cfg.assert_invariants:
            report = []
            if self._last_snapshot is not None:
                report += check_monotonicity(self._last_snapshot, sol)
            if self.cfg.reference_probabilities is not None:
                report += check_sandwich(sol, self.cfg.reference_probabilities)
            if report:
                raise InvariantViolation(report, "after bound update")
            self._last_snapshot = sol
        d = decide(sol, self.init, self.prop.threshold, self.prop.relation)
        self.decisions.append(d)
        if d.verdict is not Verdict.UNKNOWN:
            final = self._final_phase and d.l_init == d.u_init
            raise _Decided(d, TerminationKind.FINAL if final else TerminationKind.EARLY)

    # -- main loop -------------------------------------------------------

    def run(self) -> CheckResult:
        y, rel = self.prop.threshold, self.prop.relation
        if self.prop.is_bad(self.init, self.K):
            one = Fraction(1)
            verdict = Verdict.PASS if rel.holds(one, y) else Verdict.FAIL
            return self._result(Decision(verdict, one, one), TerminationKind.INIT_IN_BAD)
        d = decide(None, self.init, y, rel)
        if d.verdict is not Verdict.UNKNOWN:
            self.decisions.append(d)
            return self._result(d, TerminationKind.EARLY)
        self.seq = FrameSequence(self.model, self.prop)
        self._solvers.append(self.seq.solver)
        try:
            iteration = 0
            while True:
                if self.cfg.max_frames is not None and self.seq.k > self.cfg.max_frames:
                    raise ResourceLimitError(f"frame limit {self.cfg.max_frames} exceeded")
                self.extend_frontier()
                iteration += 1
                if self._loop_check_due(iteration):
                    self.detect_loops()
                if self.cfg.assert_invariants:
                    self.run_invariant_suite()
                self.seq.push_frame()
                if self.seq.propagate_clauses():
                    self._closed_level = self.seq.closed_level
                    return self.final_termination_search()
        except _Decided as done:
            return self._result(done.decision, done.kind)

    def _loop_check_due(self, iteration: int) -> bool:
        mode = self.cfg.loop_check_mode
        if mode is LoopCheckMode.EVERY_ITERATION:
            return True
        if mode is LoopCheckMode.EVERY_N:
            return iteration % max(1, self.cfg.loop_check_every) == 0
        return False

    def extend_frontier(self) -> None:
        """Block every CTI at the frontier, then every danger state still in it."""
        seq = self.seq
        while True:
            cti = seq.find_cti()
            if cti is not None:
                s, t = cti
                self.cti_count += 1
                if self.first_cti is None:
                    self.first_cti = cti
                self._register(s, t)
                self.remove_cti(s, seq.k)
                continue
            danger = [s for s in self.ledger.states if s not in self.ledger.bad_members]
            s = seq.find_member(danger, seq.k)
            if s is None:
                return
            self.remove_cti(s, seq.k)

    def remove_cti(self, s: int, k: int) -> None:
        """Remove ``s`` from ``F_1..F_k`` by backward search over obligations.

        A state with an edge from ``I`` has that edge recorded and is then
        handled like any other; ``I`` itself is blocked ungeneralized at the
        levels where ``!I`` is inductive.
        """
        seq = self.seq
        queue = [(k, next(self._tick), s)]
        while queue:
            i, _, q = heapq.heappop(queue)
            if not seq.contains(q, i):
                continue
            if q != self.init and seq.has_init_predecessor(q):
                self._register(self.init, q)
            j = seq.max_inductive_level(q)
            if q == self.init:
                seq.block_state(q, min(j + 1, seq.k))
            else:
                seq.add_clause_at(seq.generalize(q, j), j)
            if j >= i - 1:
                continue
            t = seq.predecessor(q, j + 1)
            if t is not None:
                self._register(t, q)
                heapq.heappush(queue, (j + 1, next(self._tick), t))
            heapq.heappush(queue, (i, next(self._tick), q))

    def detect_loops(self) -> None:
        if self._finder is None:
            self._finder = InternalTransitionFinder(self.model, self.ledger)
            self._solvers.append(self._finder.solver)
        while True:
            edge = self._finder.find()
            if edge is None:
                return
            self._register(*edge)

    # -- after closure ---------------------------------------------------

    def final_termination_search(self) -> CheckResult:
        """Explore every transition out of the danger states reachable from ``I``.

        Successors are classified as bad, danger (already in the ledger), safe
        (inside the closed frame) or remainder (outside both, explored next).
        """
        self._final_phase = True
        seq, ledger = self.seq, self.ledger
        c = self._closed_level
        if self.cfg.assert_invariants:
            self.run_invariant_suite()
        leak = seq.leak(c)
        if leak is not None:
            s, t = leak
            raise EngineError(f"closed frame F_{c} leaks via {format_state(s, self.K)} -> {format_state(t, self.K)}")
        in_frame = seq.frame_predicate(c)
        if in_frame(self.init):
            # a closed frame inside the safe region holds I
            zero = Fraction(0)
            kind = TerminationKind.TRIVIAL if not ledger.states else TerminationKind.FINAL
            verdict = Verdict.PASS if self.prop.relation.holds(zero, self.prop.threshold) else Verdict.FAIL
            d = Decision(verdict, zero, zero)
            self.decisions.append(d)
            return self._result(d, kind)

        solver = SatSolver(self.K)
        self._solvers.append(solver)
        solver.add_clauses(cl.lits for cl in self.model.trans)
        ledger.add_state(self.init)
        self.bounds.add_state(self.init)
        self._update()
        stack = [self.init]
        explored = set()
        while stack:
            s = stack.pop()
            if s in explored or s in ledger.bad_members:
                continue
            explored.add(s)
            sel = solver.new_var()
            for t in ledger.successors[s]:
                solver.add_clause([-sel] + list(state_cube(t, self.K, True).negate().lits))
                if t not in explored and t not in ledger.safe:
                    stack.append(t)
            src = list(state_cube(s, self.K).lits)
            while True:
                model = solver.solve([sel] + src)
                if model is None:
                    break
                t = 0
                for v in range(self.K + 1, 2 * self.K + 1):
                    t = (t << 1) | model[v]
                solver.add_clause([-sel] + list(state_cube(t, self.K, True).negate().lits))
                safe = t in ledger.safe or (t not in ledger and in_frame(t))
                self._register(s, t, safe)
                if t not in explored and t not in ledger.safe:
                    stack.append(t)
            solver.add_clause([-sel])
        d = decide(self.bounds.solve([self.init]), self.init, self.prop.threshold, self.prop.relation)
        raise EngineError(f"search exhausted with undecided bounds [{d.l_init}, {d.u_init}]")

    # -- invariants --------------------------------------------------------

    def run_invariant_suite(self) -> None:
        self.invariant_checks += 1
        report = self.seq.check_frame_invariants()
        report += self.ledger.disjointness_check(self.seq)
        ref = self.cfg.reference_probabilities
        if ref is not None:
            for s in self.ledger.states:
                if s not in self.ledger.bad_members and ref.get(s, Fraction(0)) == 0:
                    report.append(f"(5) danger state {format_state(s, self.K)} cannot reach a bad state")
        sol = self.bounds.solve()
        if self._last_snapshot is not None:
            report += check_monotonicity(self._last_snapshot, sol)
        if ref is not None:
            report += check_sandwich(sol, ref)
        if report:
            raise InvariantViolation(report, f"at frame {self.seq.k}")
        self._last_snapshot = sol

    # -- results -----------------------------------------------------------

    def _result(self, d: Decision, kind: TerminationKind) -> CheckResult:
        res = CheckResult(
            verdict=d.verdict,
            termination_kind=kind,
            l_init=d.l_init,
            u_init=d.u_init,
            frames_used=self.seq.k if self.seq is not None else 0,
            cti_count=self.cti_count,
            ledger_state_count=len(self.ledger.states),
            ledger_edge_count=len(self.ledger.transitions),
            sat_query_count=sum(s.queries for s in self._solvers),
            first_cti=self.first_cti,
            decisions=self.decisions,
            bound_trace=self.trace,
            invariant_checks=self.invariant_checks,
        )
        res.certificate = self._certificate(d.verdict)
        return res

    def _certificate(self, verdict: Verdict) -> str | None:
        if verdict is Verdict.PASS:
            if self._closed_level is None:
                return None
            lines = ["invariant"]
            lines += [f"clause {' '.join(map(str, c.lits))}" for c in sorted(self.seq.frames[self._closed_level])]
            return "\n".join(lines) + "\n"
        return witness_model(self.model, self.prop, self.ledger, self.init)


def witness_model(model: SymbolicDtmc, prop: PropertySpec, ledger: DangerLedger, init: int) -> str | None:
    """Ledger edges reachable from ``I`` as an explicit sub-chain in model format."""
    keep = ledger.reachable_from(init)
    edges = {(s, t): ledger.transitions[(s, t)] for s in keep for t in ledger.successors.get(s, ())}
    if not edges:
        return None
    sub = explicit_dtmc_model(model.num_vars, init, edges, prop.bad_cubes)
    return serialize_model(sub)


def check(model: SymbolicDtmc, prop: PropertySpec, cfg: EngineConfig | None = None) -> CheckResult:
    return Engine(model, prop, cfg).run()
