"""Symbolic DTMC representation, properties and the model file format.

Variables are numbered ``1..K``; the primed copy of variable ``i`` is ``K + i``.
Literals are signed integers in the DIMACS style.

A complete state is an ``int`` bit-vector in which variable ``x1`` is the most
significant bit, so ``state_from_bits("10")`` is the state with ``x1 = 1`` and
``x2 = 0``.  A pair ``(s, t)`` of states is packed as ``(s << K) | t``, which makes
literal ``v`` (over ``1..2K``) correspond to bit ``2K - v`` of the pair.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence


class ModelError(Exception):
    """Base class for malformed models."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelSemanticError(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelConsistencyError(ModelError):
    """The CNF transition relation and the probability map disagree on a pair."""


class VariableLimitError(ModelError):
    """Explicit enumeration refused because the model has too many variables."""


def _normalize(lits: Iterable[int], kind: str) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    for lit in lits:
        lit = int(lit)
        if lit == 0:
            raise ValueError(f"{kind} literal 0 is not a variable")
        prev = seen.get(abs(lit))
        if prev is not None and prev != lit:
            raise ValueError(f"{kind} contains both {abs(lit)} and {-abs(lit)}")
        seen[abs(lit)] = lit
    return tuple(seen[v] for v in sorted(seen))


def _mask_value(lits: Iterable[int], width: int) -> tuple[int, int]:
    mask = value = 0
    for lit in lits:
        bit = 1 << (width - abs(lit))
        mask |= bit
        if lit > 0:
            value |= bit
    return mask, value


@dataclass(frozen=True, order=True)
class Clause:
    """Disjunction of literals.  Tautologies are rejected."""

    lits: tuple[int, ...] = ()

    def __init__(self, lits: Iterable[int] = ()):
        object.__setattr__(self, "lits", _normalize(lits, "clause"))

    def negate(self) -> "Cube":
        return Cube(-lit for lit in self.lits)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(abs(lit) for lit in self.lits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.lits)

    def __len__(self) -> int:
        return len(self.lits)

    def __str__(self) -> str:
        if not self.lits:
            return "false"
        return " | ".join(_lit_name(lit) for lit in self.lits)


@dataclass(frozen=True, order=True)
class Cube:
    """Conjunction of literals; the dual of :class:`Clause`."""

    lits: tuple[int, ...] = ()

    def __init__(self, lits: Iterable[int] = ()):
        object.__setattr__(self, "lits", _normalize(lits, "cube"))

    def negate(self) -> Clause:
        return Clause(-lit for lit in self.lits)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(abs(lit) for lit in self.lits)

    def shifted(self, offset: int) -> "Cube":
        """Rename every variable ``v`` to ``v + offset`` (priming/unpriming)."""
        return Cube(lit + offset if lit > 0 else lit - offset for lit in self.lits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.lits)

    def __len__(self) -> int:
        return len(self.lits)

    def __str__(self) -> str:
        if not self.lits:
            return "true"
        return " & ".join(_lit_name(lit) for lit in self.lits)


def _lit_name(lit: int) -> str:
    return f"x{lit}" if lit > 0 else f"!x{-lit}"


# -- states ---------------------------------------------------------------


def state_from_bits(bits: str) -> int:
    """``"10"`` -> state with x1 = 1, x2 = 0."""
    return int(bits, 2)


def state_bits(s: int, num_vars: int) -> str:
    return format(s, f"0{num_vars}b")


def format_state(s: int, num_vars: int) -> str:
    return f"s({state_bits(s, num_vars)})"


def state_cube(s: int, num_vars: int, primed: bool = False) -> Cube:
    offset = num_vars if primed else 0
    return Cube(
        (i + offset) if (s >> (num_vars - i)) & 1 else -(i + offset)
        for i in range(1, num_vars + 1)
    )


def state_from_values(values: Sequence[bool]) -> int:
    s = 0
    for v in values:
        s = (s << 1) | bool(v)
    return s


def cube_states(cube: Cube, num_vars: int) -> Iterator[int]:
    """Enumerate the states (over ``1..num_vars``) satisfying an unprimed cube."""
    mask, value = _mask_value(cube.lits, num_vars)
    free = [1 << (num_vars - v) for v in range(1, num_vars + 1) if not mask & (1 << (num_vars - v))]
    for combo in itertools.product((0, 1), repeat=len(free)):
        s = value
        for bit, on in zip(free, combo):
            if on:
                s |= bit
        yield s


def cube_holds(cube: Cube, s: int, num_vars: int) -> bool:
    mask, value = _mask_value(cube.lits, num_vars)
    return (s & mask) == value


def clause_holds(clause: Clause, s: int, num_vars: int) -> bool:
    mask, neg = _mask_value(clause.negate().lits, num_vars)
    return (s & mask) != neg


def parse_fraction(text: str) -> Fraction:
    if not re.fullmatch(r"\s*\d+\s*(/\s*\d+\s*)?", text):
        raise ValueError(f"not a fraction: {text!r}")
    num, _, den = text.partition("/")
    den = den.strip() or "1"
    if int(den) == 0:
        raise ValueError("zero denominator")
    return Fraction(int(num), int(den))


# -- model ----------------------------------------------------------------


@dataclass(frozen=True)
class ProbEntry:
    """``P(s, s') = p`` for every ``s`` matching ``frm`` and ``s'`` matching ``to``.

    ``to`` is stored over the primed variables ``K+1..2K``.
    """

    frm: Cube
    to: Cube
    p: Fraction


class Relation(enum.Enum):
    STRICTLY_LESS = "lt"
    AT_LEAST = "ge"

    def holds(self, probability: Fraction, threshold: Fraction) -> bool:
        if self is Relation.STRICTLY_LESS:
            return probability < threshold
        return probability >= threshold


@dataclass(frozen=True)
class PropertySpec:
    """``P_{<y}[F bad]`` (``STRICTLY_LESS``) or ``P_{>=y}[F bad]`` (``AT_LEAST``).

    ``bad_cubes`` is the disjunction of failure states; the safe predicate is the
    conjunction of their negations.  ``threshold`` may be left unset by generators.
    """

    bad_cubes: tuple[Cube, ...]
    threshold: Fraction | None = None
    relation: Relation = Relation.STRICTLY_LESS

    def __post_init__(self):
        if not self.bad_cubes:
            raise ValueError("a property needs at least one bad cube")
        if self.threshold is not None:
            y = Fraction(self.threshold)
            if not 0 <= y <= 1:
                raise ValueError(f"threshold {y} outside [0, 1]")
            object.__setattr__(self, "threshold", y)

    @property
    def safe_clauses(self) -> tuple[Clause, ...]:
        return tuple(sorted({cube.negate() for cube in self.bad_cubes}))

    def with_threshold(self, threshold: Fraction, relation: Relation | None = None) -> "PropertySpec":
        return PropertySpec(self.bad_cubes, Fraction(threshold), relation or self.relation)

    def is_bad(self, s: int, num_vars: int) -> bool:
        return any(cube_holds(c, s, num_vars) for c in self.bad_cubes)


@dataclass(frozen=True, eq=False)
class SymbolicDtmc:
    """``D = (x, I, T, P)`` with a single initial state.

    ``bad`` holds the failure cubes carried by a model file (may be empty for
    models built in code; properties carry their own cubes).
    """

    num_vars: int
    init: Cube
    trans: tuple[Clause, ...]
    prob_entries: tuple[ProbEntry, ...]
    bad: tuple[Cube, ...] = ()
    _from_index: dict = field(default=None, repr=False, compare=False)
    _trans_masks: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        K = self.num_vars
        if K < 1:
            raise ModelSemanticError("a model needs at least one variable")
        if len(self.init) != K or any(abs(l) > K for l in self.init):
            raise ModelSemanticError("init must be a complete cube over the unprimed variables")
        for c in self.bad:
            if any(abs(l) > K for l in c):
                raise ModelSemanticError(f"bad cube {c} mentions a primed variable")
        for c in self.trans:
            if any(abs(l) > 2 * K for l in c):
                raise ModelSemanticError(f"clause {c} mentions a variable beyond {2 * K}")
        seen = set()
        for e in self.prob_entries:
            if not 0 < e.p <= 1:
                raise ModelSemanticError(f"probability {e.p} outside (0,1]")
            if any(abs(l) > K for l in e.frm):
                raise ModelSemanticError(f"from-cube {e.frm} must use unprimed variables")
            if any(not K < abs(l) <= 2 * K for l in e.to):
                raise ModelSemanticError(f"to-cube {e.to} must use primed variables")
            key = (e.frm, e.to)
            if key in seen:
                raise ModelSemanticError(f"duplicate prob entry {e.frm} -> {e.to}")
            seen.add(key)
        object.__setattr__(self, "init", Cube(self.init.lits))
        object.__setattr__(self, "_trans_masks", tuple(
            _mask_value(c.negate().lits, 2 * K) for c in self.trans))
        index: dict[int, dict[int, list]] = {}
        for e in self.prob_entries:
            fm, fv = _mask_value(e.frm.lits, K)
            tm, tv = _mask_value(e.to.shifted(-K).lits, K)
            index.setdefault(fm, {}).setdefault(fv, []).append((tm, tv, e))
        object.__setattr__(self, "_from_index", index)
        overlaps = find_overlapping_entries(self)
        if overlaps:
            a, b = overlaps[0]
            raise ModelSemanticError(
                f"prob entries overlap: ({a.frm} -> {a.to}) and ({b.frm} -> {b.to})")

    @property
    def init_state(self) -> int:
        return state_from_values([lit > 0 for lit in self.init.lits])

    @property
    def num_states(self) -> int:
        return 1 << self.num_vars

    def trans_holds(self, s: int, t: int) -> bool:
        pair = (s << self.num_vars) | t
        return all((pair & m) != v for m, v in self._trans_masks)

    def matching_entries(self, s: int, t: int) -> list[ProbEntry]:
        out = []
        for fm, by_value in self._from_index.items():
            for tm, tv, e in by_value.get(s & fm, ()):
                if t & tm == tv:
                    out.append(e)
        return out

    def successors(self, s: int) -> Iterator[tuple[int, Fraction]]:
        """Successors of ``s`` according to the probability map."""
        K = self.num_vars
        for fm, by_value in self._from_index.items():
            for tm, tv, e in by_value.get(s & fm, ()):
                yield from ((t, e.p) for t in cube_states(e.to.shifted(-K), K))


def find_overlapping_entries(m: SymbolicDtmc, limit: int = 1) -> list[tuple[ProbEntry, ProbEntry]]:
    """Pairs of prob entries whose domains share a concrete ``(s, s')`` pair.

    Two entries overlap iff their from-cubes and their to-cubes are each jointly
    satisfiable, i.e. no variable is fixed to opposite values.
    """
    import numpy as np

    entries = m.prob_entries
    n = len(entries)
    if n < 2:
        return []
    width = 2 * m.num_vars
    pairs = [_mask_value(e.frm.lits + e.to.lits, width) for e in entries]
    found: list[tuple[ProbEntry, ProbEntry]] = []
    if width <= 63:
        masks = np.array([p[0] for p in pairs], dtype=np.uint64)
        values = np.array([p[1] for p in pairs], dtype=np.uint64)
        for i in range(n - 1):
            clash = (values[i] ^ values[i + 1:]) & masks[i] & masks[i + 1:]
            hits = np.flatnonzero(clash == 0)
            for h in hits:
                found.append((entries[i], entries[i + 1 + int(h)]))
                if len(found) >= limit:
                    return found
        return found
    for i, j in itertools.combinations(range(n), 2):
        (mi, vi), (mj, vj) = pairs[i], pairs[j]
        if (vi ^ vj) & mi & mj == 0:
            found.append((entries[i], entries[j]))
            if len(found) >= limit:
                break
    return found


def transition_probability(m: SymbolicDtmc, s: int, t: int) -> Fraction:
    """Exact ``P(s, t)``; raises :class:`ModelConsistencyError` if ``T`` disagrees."""
    matches = m.matching_entries(s, t)
    p = matches[0].p if matches else Fraction(0)
    if bool(matches) != m.trans_holds(s, t):
        K = m.num_vars
        side = "P > 0 but T is false" if matches else "T holds but P = 0"
        raise ModelConsistencyError(
            f"transition {format_state(s, K)} -> {format_state(t, K)}: {side}")
    return p


# -- stochasticity --------------------------------------------------------


@dataclass
class ValidationReport:
    mass_errors: dict[int, Fraction] = field(default_factory=dict)
    mismatches: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mass_errors and not self.mismatches

    def lines(self, num_vars: int) -> list[str]:
        out = [f"mass {format_state(s, num_vars)} = {p}" for s, p in sorted(self.mass_errors.items())]
        out += [f"mismatch {format_state(s, num_vars)} -> {format_state(t, num_vars)}: {why}"
                for s, t, why in self.mismatches]
        return out


def validate_stochastic(m: SymbolicDtmc, var_limit: int = 20, max_mismatches: int = 1000) -> ValidationReport:
    """Check outgoing mass and ``T <-> P > 0`` by explicit enumeration.

    The ``T -> P > 0`` direction is enumerated with a SAT solver over
    ``T`` conjoined with the negation of every prob-entry domain.
    """
    from .sat import SatSolver

    K = m.num_vars
    if K > var_limit:
        raise VariableLimitError(f"{K} variables exceeds the enumeration limit {var_limit}")
    report = ValidationReport()
    out_mass: dict[int, Fraction] = {}
    touched: set[int] = set()
    for e in m.prob_entries:
        to_cube = e.to.shifted(-K)
        targets = list(cube_states(to_cube, K))
        for s in cube_states(e.frm, K):
            out_mass[s] = out_mass.get(s, Fraction(0)) + e.p * len(targets)
            touched.add(s)
            for t in targets:
                touched.add(t)
                if not m.trans_holds(s, t) and len(report.mismatches) < max_mismatches:
                    report.mismatches.append((s, t, "P > 0 but T is false"))
    for s in sorted(touched):
        mass = out_mass.get(s, Fraction(0))
        if mass != 1:
            report.mass_errors[s] = mass

    solver = SatSolver(K)
    for c in m.trans:
        solver.add_clause(c.lits)
    for e in m.prob_entries:
        solver.add_clause([-l for l in e.frm.lits + e.to.lits])
    while len(report.mismatches) < max_mismatches:
        model = solver.solve()
        if model is None:
            break
        s = state_from_values(model[1:K + 1])
        t = state_from_values(model[K + 1:2 * K + 1])
        report.mismatches.append((s, t, "T holds but P = 0"))
        solver.add_clause(state_cube((s << K) | t, 2 * K).negate().lits)
    return report


# -- CNF from explicit pairs ----------------------------------------------


def cnf_from_assignments(assignments: Iterable[int], width: int) -> list[Clause]:
    """A CNF over variables ``1..width`` whose models are exactly ``assignments``.

    Built by Shannon expansion in variable order; the clause count is at most
    ``len(assignments) * width + 1`` and no auxiliary variables are introduced.
    """
    clauses: list[Clause] = []
    stack = [(1, sorted(set(assignments)), ())]
    while stack:
        var, subset, prefix = stack.pop()
        if not subset:
            clauses.append(Clause(-lit for lit in prefix))
            continue
        if len(subset) == 1 << (width - var + 1):
            continue
        bit = 1 << (width - var)
        high = [a for a in subset if a & bit]
        low = [a for a in subset if not a & bit]
        stack.append((var + 1, high, prefix + (var,)))
        stack.append((var + 1, low, prefix + (-var,)))
    return sorted(clauses)


def explicit_dtmc_model(
    num_vars: int,
    init: int,
    edges: dict[tuple[int, int], Fraction],
    bad: Sequence[Cube] = (),
) -> SymbolicDtmc:
    """Build a symbolic model from an explicit edge map ``(s, t) -> p``."""
    K = num_vars
    entries = tuple(
        ProbEntry(state_cube(s, K), state_cube(t, K, primed=True), Fraction(p))
        for (s, t), p in sorted(edges.items())
    )
    trans = tuple(cnf_from_assignments(((s << K) | t for s, t in edges), 2 * K))
    return SymbolicDtmc(K, state_cube(init, K), trans, entries, tuple(bad))


# -- file format ----------------------------------------------------------


def _ints(tokens: Sequence[str], lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise ModelSyntaxError(f"expected signed integers, got {' '.join(tokens)!r}", lineno) from None


def parse_model(text: str) -> SymbolicDtmc:
    """Parse the line-oriented ``dtmc`` format."""
    num_vars = None
    init = None
    bad: list[Cube] = []
    trans: list[Clause] = []
    entries: list[ProbEntry] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if not header_seen:
            if line != "dtmc":
                raise ModelSyntaxError("first line must be 'dtmc'", lineno)
            header_seen = True
            continue
        if keyword == "vars":
            if num_vars is not None:
                raise ModelSyntaxError("duplicate 'vars' line", lineno)
            vals = _ints(rest.split(), lineno)
            if len(vals) != 1 or vals[0] < 1:
                raise ModelSyntaxError("'vars' takes one positive integer", lineno)
            num_vars = vals[0]
            continue
        if num_vars is None:
            raise ModelSyntaxError(f"'{keyword}' before 'vars'", lineno)
        K = num_vars
        if keyword == "init":
            if init is not None:
                raise ModelSemanticError("only a single initial state is supported", lineno)
            lits = _ints(rest.split(), lineno)
            _check_range(lits, K, lineno)
            try:
                init = Cube(lits)
            except ValueError as exc:
                raise ModelSemanticError(str(exc), lineno) from None
            if len(init) != K:
                raise ModelSemanticError("incomplete init cube", lineno)
        elif keyword == "bad":
            lits = _ints(rest.split(), lineno)
            _check_range(lits, K, lineno)
            if not lits:
                raise ModelSemanticError("empty bad cube", lineno)
            try:
                bad.append(Cube(lits))
            except ValueError as exc:
                raise ModelSemanticError(str(exc), lineno) from None
        elif keyword == "trans":
            lits = _ints(rest.split(), lineno)
            _check_range(lits, 2 * K, lineno)
            try:
                trans.append(Clause(lits))
            except ValueError as exc:
                raise ModelSemanticError(str(exc), lineno) from None
        elif keyword == "prob":
            m = re.fullmatch(r"([^|]*)\|([^:]*):(.*)", rest)
            if not m:
                raise ModelSyntaxError("expected 'prob FROM | TO : a/b'", lineno)
            frm = _ints(m.group(1).split(), lineno)
            to = _ints(m.group(2).split(), lineno)
            _check_range(frm, K, lineno)
            _check_range(to, K, lineno)
            try:
                p = parse_fraction(m.group(3))
            except ValueError as exc:
                raise ModelSyntaxError(str(exc), lineno) from None
            if not 0 < p <= 1:
                raise ModelSemanticError(f"probability outside (0,1]: {p}", lineno)
            try:
                entry = ProbEntry(Cube(frm), Cube(to).shifted(K), p)
            except ValueError as exc:
                raise ModelSemanticError(str(exc), lineno) from None
            if any((e.frm, e.to) == (entry.frm, entry.to) for e in entries):
                raise ModelSemanticError("duplicate prob entry", lineno)
            entries.append(entry)
        else:
            raise ModelSyntaxError(f"unknown keyword {keyword!r}", lineno)
    if not header_seen:
        raise ModelSyntaxError("empty model file")
    if num_vars is None:
        raise ModelSyntaxError("missing 'vars' line")
    if init is None:
        raise ModelSemanticError("missing 'init' line")
    return SymbolicDtmc(num_vars, init, tuple(trans), tuple(entries), tuple(bad))


def _check_range(lits: Sequence[int], bound: int, lineno: int) -> None:
    for lit in lits:
        if lit == 0 or abs(lit) > bound:
            raise ModelSemanticError(f"variable {lit} out of range 1..{bound}", lineno)


def _fmt_lits(lits: Iterable[int]) -> str:
    return " ".join(str(l) for l in lits)


def serialize_model(m: SymbolicDtmc, bad: Sequence[Cube] | None = None) -> str:
    """Inverse of :func:`parse_model`; clauses and entries are sorted."""
    K = m.num_vars
    bad = m.bad if bad is None else bad
    lines = ["dtmc", f"vars {K}", f"init {_fmt_lits(m.init.lits)}"]
    lines += [f"bad {_fmt_lits(c.lits)}" for c in sorted(bad)]
    lines += [f"trans {_fmt_lits(c.lits)}".rstrip() for c in sorted(m.trans)]
    for e in sorted(m.prob_entries, key=lambda e: (e.frm.lits, e.to.lits)):
        p = f"{e.p.numerator}/{e.p.denominator}"
        lines.append(f"prob {_fmt_lits(e.frm.lits)} | {_fmt_lits(e.to.shifted(-K).lits)} : {p}")
    return "\n".join(lines) + "\n"


def load_model(path) -> SymbolicDtmc:
    with open(path) as fh:
        return parse_model(fh.read())
