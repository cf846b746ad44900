"""Explicit-state reference checker and random model generator.

Everything here works on the fully enumerated chain and shares no code with the
symbolic engine beyond the model type: SCCs come from networkx and the linear
systems are solved by a separate exact elimination routine.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .model import (
    Cube,
    ModelConsistencyError,
    PropertySpec,
    Relation,
    SymbolicDtmc,
    VariableLimitError,
    _mask_value,
    cube_holds,
    explicit_dtmc_model,
    format_state,
)


@dataclass
class ExplicitDtmc:
    num_vars: int
    init: int
    edges: dict[int, list[tuple[int, Fraction]]]
    bad: frozenset[int]
    mass_errors: dict[int, Fraction] = field(default_factory=dict)

    @property
    def states(self) -> range:
        return range(1 << self.num_vars)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())

    def probability(self, s: int, t: int) -> Fraction:
        return next((p for u, p in self.edges.get(s, ()) if u == t), Fraction(0))


@dataclass(frozen=True)
class DangerPath:
    states: tuple[int, ...]
    probability: Fraction


def explicate(m: SymbolicDtmc, bad: Sequence[Cube] | None = None, var_limit: int = 20,
              cross_check_limit: int = 10) -> ExplicitDtmc:
    """Enumerate every state; the transition CNF is cross-checked pairwise on small models."""
    K = m.num_vars
    if K > var_limit:
        raise VariableLimitError(f"{K} variables exceeds the enumeration limit {var_limit}")
    cubes = m.bad if bad is None else bad
    n = 1 << K
    edges: dict[int, list[tuple[int, Fraction]]] = {}
    for s in range(n):
        succ: dict[int, Fraction] = {}
        for t, p in m.successors(s):
            succ[t] = succ.get(t, Fraction(0)) + p
        if succ:
            edges[s] = sorted(succ.items())
    mass_errors = {s: sum(p for _, p in out) for s, out in edges.items()}
    mass_errors = {s: v for s, v in mass_errors.items() if v != 1}
    if K <= cross_check_limit:
        masks = [_mask_value(c.negate().lits, 2 * K) for c in m.trans]
        targets = np.arange(n, dtype=np.int64)
        for s in range(n):
            pairs = (s << K) | targets
            ok = np.ones(n, dtype=bool)
            for mask, value in masks:
                ok &= (pairs & mask) != value
            allowed = set(np.flatnonzero(ok).tolist())
            listed = {t for t, _ in edges.get(s, ())}
            if allowed != listed:
                t = min(allowed ^ listed)
                raise ModelConsistencyError(
                    f"T and P disagree on {format_state(s, K)} -> {format_state(t, K)}")
    bad_states = frozenset(s for s in range(n) if any(cube_holds(c, s, K) for c in cubes))
    return ExplicitDtmc(K, m.init_state, edges, bad_states, mass_errors)


def post_star(e: ExplicitDtmc, sources: Iterable[int]) -> set[int]:
    seen = set(sources)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for t, _ in e.edges.get(s, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def pre_star(e: ExplicitDtmc, targets: Iterable[int]) -> set[int]:
    back: dict[int, list[int]] = {}
    for s, out in e.edges.items():
        for t, _ in out:
            back.setdefault(t, []).append(s)
    seen = set(targets)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for s in back.get(t, ()):
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def _gauss_jordan(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for c in range(n):
        r = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[r] = m[r], m[c]
        piv = m[c][c]
        m[c] = [v / piv for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [m[i][n] for i in range(n)]


def reach_probabilities(e: ExplicitDtmc, only_from_init: bool = False) -> dict[int, Fraction]:
    """Exact ``Pr[F bad | s]`` for every state (or for ``Post*(I)`` only)."""
    scope = post_star(e, [e.init]) if only_from_init else set(e.states)
    can_reach = pre_star(e, e.bad)
    prob = {s: Fraction(1) if s in e.bad else Fraction(0) for s in scope}
    unknown = {s for s in scope if s in can_reach and s not in e.bad}
    g = nx.DiGraph()
    g.add_nodes_from(unknown)
    g.add_edges_from((s, t) for s in unknown for t, _ in e.edges.get(s, ()) if t in unknown)
    cond = nx.condensation(g)
    for comp_id in reversed(list(nx.topological_sort(cond))):
        comp = sorted(cond.nodes[comp_id]["members"])
        pos = {s: i for i, s in enumerate(comp)}
        a = [[Fraction(0)] * len(comp) for _ in comp]
        b = [Fraction(0)] * len(comp)
        for s in comp:
            i = pos[s]
            a[i][i] += 1
            for t, p in e.edges.get(s, ()):
                if t in pos:
                    a[i][pos[t]] -= p
                else:
                    b[i] += p * prob[t]
        for s, v in zip(comp, _gauss_jordan(a, b)):
            prob[s] = v
    return prob


def reach_probability(e: ExplicitDtmc) -> Fraction:
    return reach_probabilities(e, only_from_init=True)[e.init]


def enumerate_danger_paths(e: ExplicitDtmc, max_len: int) -> list[DangerPath]:
    """All paths from ``I`` of at most ``max_len`` steps that end in their first bad state."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    paths = []
    if e.init in e.bad:
        return [DangerPath((e.init,), Fraction(1))]
    stack = [((e.init,), Fraction(1))]
    while stack:
        path, prob = stack.pop()
        for t, p in e.edges.get(path[-1], ()):
            q = prob * p
            if t in e.bad:
                paths.append(DangerPath(path + (t,), q))
            elif len(path) < max_len:
                stack.append((path + (t,), q))
    paths.sort(key=lambda d: (len(d.states), d.states))
    return paths


def verdict_holds(probability: Fraction, prop: PropertySpec) -> bool:
    return prop.relation.holds(probability, prop.threshold)


def _random_cube(rng: random.Random, K: int) -> Cube:
    length = rng.randint(max(1, K - 2), K)
    vs = rng.sample(range(1, K + 1), length)
    return Cube(v if rng.random() < 0.5 else -v for v in vs)


def random_model(seed: int, num_vars: int = 4, edge_density: float = 0.5,
                 bad_fraction: float = 0.1) -> tuple[SymbolicDtmc, PropertySpec]:
    """Seeded random chain with a threshold within 1/10 of the true probability."""
    if not 1 <= num_vars <= 6:
        raise ValueError("num_vars must lie in 1..6")
    rng = random.Random(seed)
    K = num_vars
    n = 1 << K
    max_out = max(1, min(4, 1 + round(3 * edge_density)))
    edges: dict[tuple[int, int], Fraction] = {}
    for s in range(n):
        k = rng.randint(1, min(max_out, n))
        targets = rng.sample(range(n), k)
        den = rng.randint(k, 64)
        cuts = sorted(rng.sample(range(1, den), k - 1))
        parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
        for t, part in zip(targets, parts):
            edges[(s, t)] = Fraction(part, den)
    cubes: list[Cube] = []
    covered: set[int] = set()
    while not cubes or len(covered) < bad_fraction * n:
        c = _random_cube(rng, K)
        if c in cubes:
            continue
        cubes.append(c)
        covered |= {s for s in range(n) if cube_holds(c, s, K)}
    good = [s for s in range(n) if s not in covered]
    init = rng.choice(good) if good else rng.randrange(n)
    model = explicit_dtmc_model(K, init, edges, cubes)
    prob = reach_probability(explicate(model))
    relation = rng.choice([Relation.STRICTLY_LESS, Relation.AT_LEAST])
    delta = Fraction(rng.randint(-10, 10), 100)
    if prob == 0:
        y = Fraction(rng.randint(1, 10), 100)
    else:
        y = min(Fraction(1), max(Fraction(1, 100), prob + delta))
    return model, PropertySpec(tuple(cubes), y, relation)
