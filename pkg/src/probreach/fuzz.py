"""Engine-versus-oracle differential runs on seeded random models."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .engine import CheckResult, EngineConfig, TerminationKind, check
from .model import PropertySpec, SymbolicDtmc
from .oracle import explicate, reach_probabilities, random_model


def fuzz_instance(seed: int, max_vars: int = 6) -> tuple[SymbolicDtmc, PropertySpec]:
    """The random model used for run ``seed``; parameters are derived from the seed."""
    return random_model(
        seed,
        num_vars=1 + seed % max_vars,
        edge_density=(seed % 5) / 4,
        bad_fraction=0.1 + (seed % 3) / 10,
    )


@dataclass
class DiffOutcome:
    seed: int
    probability: Fraction
    result: CheckResult
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems


def differential(model: SymbolicDtmc, prop: PropertySpec, cfg: EngineConfig | None = None,
                 seed: int = -1, with_reference: bool = True) -> DiffOutcome:
    ref = reach_probabilities(explicate(model, prop.bad_cubes))
    pr = ref[model.init_state]
    cfg = cfg or EngineConfig()
    if with_reference and cfg.reference_probabilities is None:
        cfg.reference_probabilities = ref
    res = check(model, prop, cfg)
    problems = []
    expected = prop.relation.holds(pr, prop.threshold)
    if res.passed != expected:
        problems.append(f"verdict {res.verdict.value} but Pr = {pr} vs y = {prop.threshold}")
    if res.termination_kind is TerminationKind.FINAL and not res.l_init == res.u_init == pr:
        problems.append(f"final bounds [{res.l_init}, {res.u_init}] differ from Pr = {pr}")
    if not res.l_init <= pr <= res.u_init:
        problems.append(f"bounds [{res.l_init}, {res.u_init}] miss Pr = {pr}")
    if res.frames_used > (1 << model.num_vars) + 1:
        problems.append(f"{res.frames_used} frames exceed 2^K + 1")
    return DiffOutcome(seed, pr, res, problems)
