"""Command-line entry point: ``chaingrade run|validate|examples|schema``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import EXAMPLES
from .problem import (
    EXIT_INPUT,
    EXIT_OK,
    SpecError,
    error_document,
    exit_code,
    format_result,
    run_spec,
    spec_json_schema,
    validate_spec,
)


def _load(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8") if path != "-" else sys.stdin.read()
    except OSError as exc:
        raise SpecError("syntax", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("syntax", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _apply_overrides(raw, args):
    if not isinstance(raw, dict):
        return raw
    overrides = {}
    if args.oracle:
        overrides["oracle"] = True
    if args.tolerance is not None:
        overrides["tolerance"] = args.tolerance
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        raw = dict(raw)
        opts = dict(raw.get("options") or {})
        opts.update(overrides)
        raw["options"] = opts
    return raw


def cmd_run(args) -> int:
    raw = None
    try:
        raw = _apply_overrides(_load(args.spec), args)
        spec = validate_spec(raw)
    except SpecError as exc:
        doc = error_document(exc, raw)
    else:
        doc = run_spec(spec, raw)
    sys.stdout.write(format_result(doc, args.mode))
    return exit_code(doc)


def cmd_validate(args) -> int:
    try:
        spec = validate_spec(_load(args.spec))
    except SpecError as exc:
        where = f" at {exc.path}" if exc.path else ""
        print(f"{exc.category} error{where}: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    print(f"ok: {spec.kind}")
    return EXIT_OK


def cmd_examples(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in EXAMPLES.items():
        path = out / name
        path.write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
        print(path)
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(spec_json_schema(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaingrade", description="Relative divergence and MRDP solvers on chain bundles.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a spec file and print the result document")
    run.add_argument("spec", help="path to a JSON spec ('-' for stdin)")
    run.add_argument("--oracle", action="store_true", help="also run brute-force / reference checks")
    run.add_argument("--mode", choices=["human", "machine"], default="human")
    run.add_argument("--tolerance", type=float, default=None, help="oracle agreement tolerance")
    run.add_argument("--seed", type=int, default=None, help="seed for reference searches")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a spec file without running it")
    val.add_argument("spec")
    val.set_defaults(func=cmd_validate)

    ex = sub.add_parser("examples", help="write the worked example specs to a directory")
    ex.add_argument("--out", default="chaingrade-examples")
    ex.set_defaults(func=cmd_examples)

    sch = sub.add_parser("schema", help="print the JSON schema of spec documents")
    sch.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
