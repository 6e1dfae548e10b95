"""Command-line entry point: ``infocausality <command> ...``.

Exit codes: 0 success, 2 box failed validation, 64 usage error, 65 protocol
or data error, 74 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path

from . import __version__
from .boxes import (
    CHSH,
    BoxError,
    BoxPoint,
    Scenario,
    chsh_value,
    format_fraction,
    make_isotropic,
    make_local_deterministic,
    make_pr_box,
    make_white_noise,
    mix,
    tier_of,
    to_fraction,
    validate,
)
from .geometry import classical_membership
from .infotheory import ic_sum, tsirelson_threshold
from .protocols import ProtocolError, RacConfig, run_ot, run_rac
from .rng import check_seed, run_generator

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 74

SQRT_HALF = 0.5**0.5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- box specifications -----------------------------------------------------------


def _parse_scenario(text: str) -> Scenario:
    try:
        return Scenario(*[int(v) for v in text.split(",")])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad scenario {text!r}: {exc}") from exc


def _parse_map(text: str) -> list[int]:
    if not text.isdigit():
        raise UsageError(f"deterministic map must be a digit string, got {text!r}")
    return [int(c) for c in text]


def _load_box(path: str) -> BoxPoint:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    return BoxPoint.from_json(text)


def parse_component(text: str, scenario: Scenario = CHSH) -> BoxPoint:
    """One box from ``pr``, ``noise``, ``iso=E``, ``det=F,G`` or ``@file.json``."""
    if text == "pr":
        return make_pr_box()
    if text == "noise":
        return make_white_noise(scenario)
    if text.startswith("iso="):
        return make_isotropic(text[4:])
    if text.startswith("det="):
        f, _, g = text[4:].partition(",")
        return make_local_deterministic(_parse_map(f), _parse_map(g), scenario)
    if text.startswith("@"):
        return _load_box(text[1:])
    raise UsageError(f"unknown box component {text!r}")


def parse_box_spec(tokens: list[str], scenario: Scenario = CHSH) -> BoxPoint:
    """Box from the positional grammar shared by ``box`` and ``membership``::

        pr | noise | iso E | det F G | mix COMPONENT:W ... | load PATH
    """
    if not tokens:
        raise UsageError("missing box specification")
    kind, rest = tokens[0], tokens[1:]
    arity = {"pr": 0, "noise": 0, "iso": 1, "det": 2, "load": 1}
    if kind in arity and len(rest) != arity[kind]:
        raise UsageError(f"'{kind}' takes {arity[kind]} argument(s)")
    if kind == "pr":
        return make_pr_box()
    if kind == "noise":
        return make_white_noise(scenario)
    if kind == "iso":
        return make_isotropic(rest[0])
    if kind == "det":
        return make_local_deterministic(_parse_map(rest[0]), _parse_map(rest[1]), scenario)
    if kind == "load":
        return _load_box(rest[0])
    if kind == "mix":
        if not rest:
            raise UsageError("'mix' needs at least one COMPONENT:WEIGHT")
        points, weights = [], []
        for item in rest:
            comp, sep, w = item.rpartition(":")
            if not sep:
                raise UsageError(f"mixture item {item!r} lacks ':WEIGHT'")
            points.append(parse_component(comp, scenario))
            weights.append(w)
        return mix(points, weights)
    raise UsageError(f"unknown box kind {kind!r}")


def box_summary(box: BoxPoint) -> dict:
    report = validate(box)
    doc = box.to_dict()
    doc["validation"] = report.to_dict()
    if box.scenario == CHSH:
        value = chsh_value(box)
        doc["chsh"] = format_fraction(value)
        doc["tier"] = tier_of(value) if report.no_signaling else None
    return doc


# -- output ---------------------------------------------------------------------------


def write_atomic(path: str, data: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return format_fraction(v)
    return str(v)


def manifest(command: str, args: argparse.Namespace) -> dict:
    params = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")
    }
    return {
        "command": command,
        "parameters": params,
        "seed": args.seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def emit(args: argparse.Namespace, data: str) -> None:
    meta = json.dumps(manifest(args.command, args), default=str)
    if args.out:
        write_atomic(args.out, data)
        write_atomic(args.out + ".manifest.json", meta + "\n")
    else:
        sys.stdout.write(data)
        sys.stderr.write(meta + "\n")


# -- commands -------------------------------------------------------------------------


def cmd_box(args) -> int:
    box = parse_box_spec(args.spec, _parse_scenario(args.scenario))
    doc = box_summary(box)
    emit(args, _dump_json(doc))
    return EXIT_OK if validate(box).ok else EXIT_INVALID


def cmd_membership(args) -> int:
    box = parse_box_spec(args.spec, _parse_scenario(args.scenario))
    if not validate(box).ok:
        emit(args, _dump_json(box_summary(box)))
        return EXIT_INVALID
    cert = classical_membership(box)
    emit(args, _dump_json(cert.to_dict()))
    return EXIT_OK


def cmd_ot(args) -> int:
    box = parse_component(args.box)
    for name in ("x0", "x1", "k"):
        if getattr(args, name) not in (0, 1):
            raise UsageError(f"{name} must be 0 or 1")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    target = (args.x0, args.x1)[args.k]
    outputs = [
        run_ot(args.x0, args.x1, args.k, box, run_generator(args.seed, t))
        for t in range(args.trials)
    ]
    correct = sum(c == target for c in outputs)
    if args.format == "csv":
        data = _csv_text(["trial", "C", "correct"],
                         [[t, c, c == target] for t, c in enumerate(outputs)])
    else:
        data = _dump_json({
            "x0": args.x0, "x1": args.x1, "k": args.k, "target": target,
            "trials": args.trials, "correct": correct,
        })
    emit(args, data)
    return EXIT_OK


def cmd_rac(args) -> int:
    if (args.E is None) == (args.box is None):
        raise UsageError("give exactly one of -E or --box")
    box = make_isotropic(args.E) if args.E is not None else parse_component(args.box)
    cfg = RacConfig(args.n, box, trials=args.trials, seed=args.seed)
    result = run_rac(cfg, jobs=args.jobs, transcript=bool(args.transcript))
    if args.format == "csv":
        rows = []
        for k in range(1 << cfg.depth):
            p = result.exact_success[k]
            row = [k, p, 2 * p - 1]
            if result.successes is not None:
                row += [result.successes[k], result.counts[k],
                        result.empirical[k], result.stderr[k]]
            else:
                row += ["", "", "", ""]
            rows.append(row)
        data = _csv_text(
            ["k", "exact", "exactBias", "successes", "trials", "empirical", "stderr"], rows
        )
    else:
        data = _dump_json(result.to_dict())
    if args.transcript:
        lines = "".join(json.dumps(r) + "\n" for r in result.transcript or [])
        write_atomic(args.transcript, lines)
    emit(args, data)
    return EXIT_OK


def _parse_range(text: str, integer: bool):
    parts = text.split(":")
    if len(parts) > 3:
        raise UsageError(f"bad range {text!r}")
    try:
        nums = [Decimal(p) for p in parts]
    except InvalidOperation as exc:
        raise UsageError(f"bad range {text!r}") from exc
    start = nums[0]
    stop = nums[1] if len(nums) > 1 else start
    step = nums[2] if len(nums) > 2 else Decimal(1)
    if step <= 0:
        raise UsageError("range step must be positive")
    values = []
    v = start
    while v <= stop:
        values.append(v)
        v = start + len(values) * step
    if not values:
        raise UsageError(f"empty range {text!r}")
    if integer:
        if any(v != v.to_integral_value() for v in values):
            raise UsageError(f"integer range expected, got {text!r}")
        return [int(v) for v in values]
    return [float(v) for v in values]


def cmd_sweep(args) -> int:
    ns = _parse_range(args.n, integer=True)
    Es = _parse_range(args.E, integer=False)
    rows = []
    for n in ns:
        for E in Es:
            try:
                ev = ic_sum(n, E)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            rows.append([n, E, ev.sum, ev.log_sum2, ev.violated])
    if args.format == "json":
        keys = ["n", "E", "icSum", "logSum2", "violated"]
        data = _dump_json([dict(zip(keys, r)) for r in rows])
    else:
        data = _csv_text(["n", "E", "icSum", "logSum2", "violated"], rows)
    emit(args, data)
    return EXIT_OK


def cmd_threshold(args) -> int:
    if args.n_max < 1:
        raise UsageError("--n-max must be positive")
    est = tsirelson_threshold(args.n_max)
    doc = {"threshold": est, "nMax": args.n_max, "gap": est - SQRT_HALF}
    if args.format == "csv":
        data = _csv_text(["threshold", "nMax", "gap"], [[est, args.n_max, est - SQRT_HALF]])
    else:
        data = _dump_json(doc)
    emit(args, data)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _rational(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except BoxError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=_seed, default=default(0))
    parser.add_argument("--format", choices=("json", "csv"), default=default("json"))
    parser.add_argument("--out", default=default(None))
    parser.add_argument("--jobs", type=int, default=default(1))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infocausality", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("box", help="build a box and report its validation and CHSH tier")
    p.add_argument("spec", nargs="+", help="pr | noise | iso E | det F G | mix C:W ... | load PATH")
    p.add_argument("--scenario", default="2,2,2,2")
    p.set_defaults(func=cmd_box)

    p = sub.add_parser("membership", help="exact local-polytope membership certificate")
    p.add_argument("spec", nargs="+")
    p.add_argument("--scenario", default="2,2,2,2")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("ot", help="oblivious transfer through one box")
    p.add_argument("x0", type=int)
    p.add_argument("x1", type=int)
    p.add_argument("k", type=int)
    p.add_argument("--box", default="pr", help="pr | noise | iso=E | det=F,G | @file")
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_ot)

    p = sub.add_parser("rac", help="concatenated random access code")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-E", type=_rational, default=None)
    p.add_argument("--box", default=None)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--transcript", default=None, help="write one JSON line per run")
    p.set_defaults(func=cmd_rac)

    p = sub.add_parser("sweep", help="IC sum over a grid of depths and biases (CSV)")
    p.add_argument("--n", required=True, help="START[:STOP] depths")
    p.add_argument("--E", required=True, help="START[:STOP[:STEP]] biases")
    p.set_defaults(func=cmd_sweep, format="csv")

    p = sub.add_parser("threshold", help="smallest bias violating IC up to a depth")
    p.add_argument("--n-max", type=int, required=True)
    p.set_defaults(func=cmd_threshold)

    for p in sub.choices.values():
        _global_flags(p, suppress=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolError, BoxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc, ProtocolError) else EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
