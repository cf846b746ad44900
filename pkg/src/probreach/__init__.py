"""Threshold reachability checking for symbolic DTMCs with exact bounds."""

from .bounds import BoundSystem, BoundsSolution, Verdict, decide
from .danger import DangerLedger
from .dice import generate_dice_model
from .engine import CheckResult, EngineConfig, LoopCheckMode, TerminationKind, check
from .frames import FrameSequence, init_frames
from .model import (
    Clause,
    Cube,
    PropertySpec,
    Relation,
    SymbolicDtmc,
    load_model,
    parse_model,
    serialize_model,
    transition_probability,
    validate_stochastic,
)
from .oracle import explicate, reach_probability

__version__ = "0.1.0"
