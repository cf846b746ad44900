"""Knuth-Yao dice run in sequence, as a symbolic DTMC.

Each die uses four variables ``a b c d`` (die ``i`` owns ``4i+1 .. 4i+4``).
``a = 0`` marks one of the seven coin-flip states ``s0..s6`` with ``bcd`` the
index; ``a = 1`` marks a finished die showing ``v`` with ``bcd = v - 1``.  The
codes ``0111``, ``1110`` and ``1111`` never occur.

The first unfinished die is the active one and flips a fair coin per step:

    s0 -> s1 s2    s1 -> s3 s4    s2 -> s5 s6    s3 -> s1 1
    s4 -> 2 3      s5 -> 4 5      s6 -> 6 s2

Dice after the active one stay at ``s0``; once every die is finished the chain
sits in a self-loop.  Every assignment obeying those rules is reachable, so the
model has ``7 * (1 + 6 + ... + 6^(N-1)) + 6^N`` valid states.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from .model import Clause, Cube, ProbEntry, PropertySpec, SymbolicDtmc, state_cube

BITS = 4
SIX = 0b1101
_INVALID = (0b0111, 0b1110, 0b1111)
_KY = {
    0: (1, 2), 1: (3, 4), 2: (5, 6), 3: (1, 8), 4: (9, 10), 5: (11, 12), 6: (13, 2),
}


def _outcome(v: int) -> int:
    return 0b1000 | (v - 1)


_STEP = {u: tuple(s if s < 8 else _outcome(s - 7) for s in succ) for u, succ in _KY.items()}


def _code_cube(die: int, code: int, offset: int = 0) -> list[int]:
    base = die * BITS + offset
    return [(base + j + 1) if (code >> (BITS - 1 - j)) & 1 else -(base + j + 1) for j in range(BITS)]


def _successors(codes: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    for i, code in enumerate(codes):
        if not code & 0b1000:
            return tuple(codes[:i] + (nxt,) + codes[i + 1:] for nxt in _STEP[code])
    return (codes,)


def _pack(codes: tuple[int, ...]) -> int:
    s = 0
    for code in codes:
        s = (s << BITS) | code
    return s


def _transition_cnf(n: int) -> list[Clause]:
    K = n * BITS
    clauses: list[Clause] = []
    for d in range(n):
        a = d * BITS + 1
        earlier = [e * BITS + 1 for e in range(d)]
        for code in _INVALID:
            clauses.append(Clause(-l for l in _code_cube(d, code)))
        # an unfinished earlier die keeps this one at s0
        for e in earlier:
            for v in range(a, a + BITS):
                clauses.append(Clause([e, -v]))
                clauses.append(Clause([e, -(v + K)]))
        # not active: bits unchanged
        clauses.append(Clause([-a, a + K]))
        for v in range(a + 1, a + BITS):
            clauses.append(Clause([-a, -v, v + K]))
            clauses.append(Clause([-a, v, -(v + K)]))
        # active in state u: next code among the coin-flip successors
        for u, succ in _STEP.items():
            guard = [-e for e in earlier] + [-l for l in _code_cube(d, u)]
            for w in range(16):
                if w not in succ:
                    clauses.append(Clause(guard + [-l for l in _code_cube(d, w, K)]))
    return clauses


def generate_dice_model(n_dice: int, at_least: int | None = None) -> tuple[SymbolicDtmc, PropertySpec]:
    """``n_dice`` dice; bad means all show six, or at least ``at_least`` do."""
    if n_dice < 1:
        raise ValueError("n_dice must be at least 1")
    k = n_dice if at_least is None else at_least
    if not 1 <= k <= n_dice:
        raise ValueError(f"at_least must lie in 1..{n_dice}")
    K = n_dice * BITS
    start = (0,) * n_dice
    seen = {start}
    frontier = [start]
    entries = []
    while frontier:
        codes = frontier.pop()
        s = _pack(codes)
        succ = _successors(codes)
        p = Fraction(1, len(succ))
        for nxt in succ:
            entries.append(ProbEntry(state_cube(s, K), state_cube(_pack(nxt), K, primed=True), p))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    bad = tuple(
        Cube(itertools.chain.from_iterable(_code_cube(d, SIX) for d in subset))
        for subset in itertools.combinations(range(n_dice), k)
    )
    entries.sort(key=lambda e: (e.frm.lits, e.to.lits))
    model = SymbolicDtmc(K, state_cube(0, K), tuple(_transition_cnf(n_dice)), tuple(entries), bad)
    return model, PropertySpec(bad)


def dice_state_count(n_dice: int) -> int:
    return 7 * sum(6 ** i for i in range(n_dice)) + 6 ** n_dice
