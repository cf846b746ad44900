"""Lower/upper reachability bounds over the discovered danger transitions.

For a state ``s`` with discovered outflow ``(t, p)`` and found mass ``m(s)``:

    l(s) = sum p * l(t)                 (undiscovered mass reaches nothing)
    u(s) = sum p * u(t) + (1 - m(s))    (undiscovered mass reaches bad)

with ``l = u = 1`` on bad states and ``l = u = 0`` on states known to be safe.
The system is solved exactly, one strongly connected component at a time in
reverse topological order.  A component whose members all have mass 1 and no
edge leaving it never reaches a bad state, so it gets ``l = u = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .model import Relation

ZERO = Fraction(0)
ONE = Fraction(1)


class MassOverflowError(ValueError):
    """Discovered outflow of a state exceeds probability 1."""


class BoundsError(ValueError):
    pass


class Verdict(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    l_init: Fraction
    u_init: Fraction


@dataclass
class BoundsSolution:
    l: dict[int, Fraction] = field(default_factory=dict)
    u: dict[int, Fraction] = field(default_factory=dict)

    def lower(self, s: int) -> Fraction:
        return self.l.get(s, ZERO)

    def upper(self, s: int) -> Fraction:
        return self.u.get(s, ONE)


def solve_linear(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact Gauss-Jordan elimination with row exchange on zero pivots."""
    n = len(rhs)
    rows = [list(r) + [b] for r, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            raise BoundsError("singular system")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        pr = rows[col]
        inv = 1 / pr[col]
        for j in range(col, n + 1):
            pr[j] *= inv
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                row = rows[r]
                for j in range(col, n + 1):
                    if pr[j]:
                        row[j] -= f * pr[j]
    return [rows[i][n] for i in range(n)]


class BoundSystem:
    def __init__(self, is_boundary: Callable[[int], bool]):
        self._is_boundary = is_boundary
        self.out: dict[int, list[tuple[int, Fraction]]] = {}
        self.mass: dict[int, Fraction] = {}
        self.boundary: set[int] = set()
        self.safe: set[int] = set()
        self._final: dict[int, Fraction] = {}

    def __contains__(self, s: int) -> bool:
        return s in self.out

    def __len__(self) -> int:
        return len(self.out)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.out.values())

    def add_state(self, s: int) -> None:
        if s not in self.out:
            self.out[s] = []
            self.mass[s] = ZERO
            if self._is_boundary(s):
                self.boundary.add(s)

    def register_transition(self, s: int, t: int, p: Fraction) -> None:
        self.add_state(s)
        self.add_state(t)
        if s in self.boundary:
            raise BoundsError(f"outflow registered for bad state {s}")
        if s in self.safe:
            raise BoundsError(f"outflow registered for safe state {s}")
        mass = self.mass[s] + p
        if mass > 1:
            raise MassOverflowError(f"found mass {mass} > 1 at state {s}")
        self.out[s].append((t, p))
        self.mass[s] = mass

    def mark_safe(self, s: int) -> None:
        """``s`` provably never reaches a bad state."""
        self.add_state(s)
        if s in self.boundary or self.out[s]:
            raise BoundsError(f"state {s} cannot be marked safe")
        self.safe.add(s)
        self._final[s] = ZERO

    def _reachable(self, roots: Iterable[int]) -> list[int]:
        seen = set()
        order = []
        stack = [r for r in roots if r in self.out]
        while stack:
            s = stack.pop()
            if s in seen:
                continue
            seen.add(s)
            order.append(s)
            if s not in self._final:
                stack.extend(t for t, _ in self.out[s] if t not in seen)
        return order

    def _sccs(self, nodes: list[int]) -> list[list[int]]:
        """Iterative Tarjan; components come out sinks first."""
        node_set = set(nodes)
        index: dict[int, int] = {}
        low: dict[int, int] = {}
        on_stack: set[int] = set()
        stack: list[int] = []
        result: list[list[int]] = []
        counter = 0
        for root in nodes:
            if root in index:
                continue
            work = [(root, 0)]
            while work:
                v, i = work.pop()
                if i == 0:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack.add(v)
                succ = self.out[v] if v not in self._final else ()
                recurse = False
                while i < len(succ):
                    w = succ[i][0]
                    i += 1
                    if w not in node_set:
                        continue
                    if w not in index:
                        work.append((v, i))
                        work.append((w, 0))
                        recurse = True
                        break
                    if w in on_stack:
                        low[v] = min(low[v], index[w])
                if recurse:
                    continue
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    result.append(comp)
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
        return result

    def solve(self, roots: Iterable[int] | None = None) -> BoundsSolution:
        """Exact bounds for every state (or those reachable from ``roots``)."""
        nodes = list(self.out) if roots is None else self._reachable(roots)
        sol = BoundsSolution()
        l, u = sol.l, sol.u
        for comp in self._sccs(nodes):
            if len(comp) == 1 and comp[0] in self._final:
                s = comp[0]
                l[s] = u[s] = self._final[s]
                continue
            if len(comp) == 1 and comp[0] in self.boundary:
                l[comp[0]] = u[comp[0]] = ONE
                continue
            self._solve_component(comp, l, u)
        return sol

    def _solve_component(self, comp: list[int], l: dict, u: dict) -> None:
        members = set(comp)
        closed = all(self.mass[s] == 1 and all(t in members for t, _ in self.out[s]) for s in comp)
        if closed:
            for s in comp:
                l[s] = u[s] = ZERO
                self._final[s] = ZERO
            return
        pos = {s: i for i, s in enumerate(comp)}
        n = len(comp)
        b_l = [ZERO] * n
        b_u = [ZERO] * n
        a = [[ZERO] * n for _ in range(n)]
        for s in comp:
            i = pos[s]
            a[i][i] += 1
            b_u[i] = 1 - self.mass[s]
            for t, p in self.out[s]:
                if t in members:
                    a[i][pos[t]] -= p
                else:
                    b_l[i] += p * l[t]
                    b_u[i] += p * u[t]
        if n == 1:
            xl = [b_l[0] / a[0][0]]
            xu = [b_u[0] / a[0][0]]
        else:
            xl = solve_linear(a, b_l) if any(b_l) else [ZERO] * n
            xu = solve_linear(a, b_u) if any(b_u) else [ZERO] * n
        for s in comp:
            l[s] = xl[pos[s]]
            u[s] = xu[pos[s]]
        if all(self.mass[s] == 1 for s in comp) and all(
                t in members or t in self._final or t in self.boundary
                for s in comp for t, _ in self.out[s]):
            for s in comp:
                self._final[s] = l[s]


def decide(sol: BoundsSolution | None, init: int, y: Fraction, relation: Relation) -> Decision:
    lo = sol.lower(init) if sol is not None else ZERO
    hi = sol.upper(init) if sol is not None else ONE
    if relation is Relation.STRICTLY_LESS:
        verdict = Verdict.PASS if hi < y else Verdict.FAIL if lo >= y else Verdict.UNKNOWN
    else:
        verdict = Verdict.PASS if lo >= y else Verdict.FAIL if hi < y else Verdict.UNKNOWN
    return Decision(verdict, lo, hi)


def check_monotonicity(prev: BoundsSolution, cur: BoundsSolution) -> list[str]:
    report = []
    for s, v in prev.l.items():
        if s in cur.l and cur.l[s] < v:
            report.append(f"(8) l({s}) decreased {v} -> {cur.l[s]}")
    for s, v in prev.u.items():
        if s in cur.u and cur.u[s] > v:
            report.append(f"(9) u({s}) increased {v} -> {cur.u[s]}")
    return report


def check_sandwich(sol: BoundsSolution, reference: Mapping[int, Fraction]) -> list[str]:
    """``l(s) <= Pr(s) <= u(s)`` for every solved state with a reference value."""
    report = []
    for s in sol.l:
        if s not in reference:
            continue
        pr = reference[s]
        if not sol.l[s] <= pr:
            report.append(f"(6) l({s}) = {sol.l[s]} exceeds Pr = {pr}")
        if not pr <= sol.u[s]:
            report.append(f"(7) u({s}) = {sol.u[s]} below Pr = {pr}")
    return report
