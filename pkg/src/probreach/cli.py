"""Command-line interface: check, oracle, gen-dice, validate, fuzz."""

from __future__ import annotations

import argparse
import sys
import time
from decimal import Decimal, localcontext
from fractions import Fraction

from .bounds import Verdict
from .dice import generate_dice_model
from .engine import EngineConfig, LoopCheckMode, check
from .fuzz import differential, fuzz_instance
from .model import ModelError, PropertySpec, Relation, load_model, parse_fraction, serialize_model, validate_stochastic
from .oracle import explicate, reach_probability

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def decimal_str(q: Fraction, digits: int = 12) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(q.numerator) / Decimal(q.denominator))


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _threshold(text: str) -> Fraction:
    try:
        y = parse_fraction(text)
    except ValueError as exc:
        raise UsageError(f"bad threshold {text!r}: {exc}") from None
    if y > 1:
        raise UsageError(f"threshold {text} outside [0, 1]")
    return y


def _load(path: str):
    try:
        return load_model(path)
    except OSError as exc:
        raise UsageError(str(exc)) from None


def cmd_check(args) -> int:
    model = _load(args.model)
    if not model.bad:
        raise UsageError("model has no 'bad' lines")
    prop = PropertySpec(model.bad, _threshold(args.threshold), Relation(args.relation))
    cfg = EngineConfig(
        loop_check_mode=LoopCheckMode(args.loop_mode),
        loop_check_every=args.loop_every,
        assert_invariants=args.assert_invariants,
        max_frames=args.max_frames,
    )
    start = time.perf_counter()
    res = check(model, prop, cfg)
    elapsed = int((time.perf_counter() - start) * 1000)
    report = [
        ("verdict", res.verdict.value),
        ("termination_kind", res.termination_kind.value),
        ("l_init", fraction_str(res.l_init)),
        ("u_init", fraction_str(res.u_init)),
        ("frames", res.frames_used),
        ("ctis", res.cti_count),
        ("ledger_states", res.ledger_state_count),
        ("ledger_edges", res.ledger_edge_count),
        ("sat_queries", res.sat_query_count),
        ("wall_time_ms", elapsed),
    ]
    for key, value in report:
        print(f"{key}={value}")
    if args.stats:
        for n, d in enumerate(res.decisions, 1):
            print(f"decision {n}: l_init={fraction_str(d.l_init)} ({decimal_str(d.l_init)}) "
                  f"u_init={fraction_str(d.u_init)} ({decimal_str(d.u_init)}) verdict={d.verdict.value}",
                  file=sys.stderr)
    if args.certificate and res.certificate is not None:
        with open(args.certificate, "w") as fh:
            fh.write(res.certificate)
    return EXIT_PASS if res.verdict is Verdict.PASS else EXIT_FAIL


def cmd_oracle(args) -> int:
    model = _load(args.model)
    p = reach_probability(explicate(model, var_limit=args.var_limit))
    print(f"probability={fraction_str(p) if p.denominator != 1 else p.numerator} ({decimal_str(p)})")
    return 0


def cmd_gen_dice(args) -> int:
    target = args.target
    if target == ["allsix"]:
        at_least = None
    elif len(target) == 2 and target[0] == "count" and target[1].isdigit():
        at_least = int(target[1])
    else:
        raise UsageError("--target takes 'allsix' or 'count K'")
    try:
        model, _ = generate_dice_model(args.dice, at_least)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = serialize_model(model)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def cmd_validate(args) -> int:
    model = _load(args.model)
    report = validate_stochastic(model, var_limit=args.var_limit)
    for line in report.lines(model.num_vars):
        print(line)
    if report.ok:
        print("ok")
    return 0 if report.ok else 1


def cmd_fuzz(args) -> int:
    for i in range(args.runs):
        seed = args.seed + i
        model, prop = fuzz_instance(seed, args.max_vars)
        cfg = EngineConfig(assert_invariants=args.assert_invariants)
        out = differential(model, prop, cfg, seed, with_reference=args.assert_invariants)
        if not out.ok:
            print(f"mismatch seed={seed} max_vars={args.max_vars}: " + "; ".join(out.problems))
            return 1
    print(f"runs={args.runs} mismatches=0")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="probreach", description="Threshold reachability checker for DTMCs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide P[F bad] against a threshold")
    p.add_argument("model")
    p.add_argument("--threshold", required=True, help="exact fraction a/b")
    p.add_argument("--relation", choices=["lt", "ge"], default="lt")
    p.add_argument("--loop-mode", choices=[m.value for m in LoopCheckMode], default=LoopCheckMode.AFTER_CLOSURE_ONLY.value)
    p.add_argument("--loop-every", type=int, default=1, help="period for --loop-mode every-n")
    p.add_argument("--assert-invariants", action="store_true")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--certificate", metavar="PATH")
    p.add_argument("--stats", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="exact probability by explicit enumeration")
    p.add_argument("model")
    p.add_argument("--var-limit", type=int, default=20)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen-dice", help="write a Knuth-Yao dice model")
    p.add_argument("--dice", type=int, required=True)
    p.add_argument("--target", nargs="+", default=["allsix"], metavar="allsix|count K")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen_dice)

    p = sub.add_parser("validate", help="check outgoing mass and T/P agreement")
    p.add_argument("model")
    p.add_argument("--var-limit", type=int, default=20)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fuzz", help="engine vs oracle on random models")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-vars", type=int, default=6, choices=range(1, 7), metavar="1..6")
    p.add_argument("--assert-invariants", action="store_true")
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # anything else is a checker bug
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
