"""Command-line surface: parse and check compacts, run scenarios, evaluate
chains, verify snapshots, print trust tables.

Exit codes: 0 success, 1 parse error, 2 well-formedness error, 3 chain
verification failure, 64 usage error (bad invocation, unreadable file),
65 data format error (malformed JSON input). Every command is deterministic
given its file inputs and flags; randomness only enters through --seed.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import fileformats
from .evaluator import evaluate
from .fileformats import DataFormatError
from .governance import ruleset_from_spec
from .lang import ParseError, check_well_formedness, parse_compact
from .ledger import verify_chain
from .network import run_network
from .trust import trust_report

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_WELL_FORMEDNESS = 2
EXIT_VERIFY = 3
EXIT_USAGE = 64
EXIT_DATA = 65


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror}") from exc


class _Usage(Exception):
    pass


def _load_spec(path: str):
    """Parse + well-formedness; raises SystemExit-style codes via exceptions."""
    text = _read_text(path)
    spec = parse_compact(text)
    diagnostics = check_well_formedness(spec)
    return spec, diagnostics


def cmd_parse(args: argparse.Namespace) -> int:
    try:
        spec, diagnostics = _load_spec(args.spec)
    except ParseError as exc:
        print(f"{args.spec}:{exc.line}:{exc.col}: error: {exc.message}", file=sys.stderr)
        return EXIT_PARSE
    for diag in diagnostics:
        print(diag.render(args.spec), file=sys.stderr)
    if any(d.severity == "error" for d in diagnostics):
        return EXIT_WELL_FORMEDNESS
    print(f"{args.spec}: ok ({len(spec.norms)} norms)", file=sys.stderr)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        spec, diagnostics = _load_spec(args.spec)
    except ParseError as exc:
        print(f"{args.spec}:{exc.line}:{exc.col}: error: {exc.message}", file=sys.stderr)
        return EXIT_PARSE
    if any(d.severity == "error" for d in diagnostics):
        for diag in diagnostics:
            print(diag.render(args.spec), file=sys.stderr)
        return EXIT_WELL_FORMEDNESS
    scenario = fileformats.read_scenario(args.scenario)
    config, roles = fileformats.read_network_config(args.net)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, gossip_seed=args.seed)
    org = fileformats.organization_from_roles(spec.context, roles)
    rules = ruleset_from_spec(spec)

    result = run_network(scenario, config, rules=rules, org=org)
    chain = result.active_chain
    bad = verify_chain(
        chain, target=config.target, roster=config.roster, rules=rules, roles_of=org.roles_of
    )
    if bad is not None:
        print(f"active chain invalid at block {bad.index}: {bad.rejection}", file=sys.stderr)
        return EXIT_VERIFY
    state = evaluate(chain, spec, org)
    report = fileformats.build_report(state, chain, trust_report(state, org), network=result)
    fileformats.write_report(report, args.out)
    if args.chain_out:
        fileformats.write_chain(chain, args.chain_out)
    print(
        f"{spec.name}: {len(report['instances'])} instances, "
        f"{len(report['facts'])} facts, converged={result.converged}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        spec, diagnostics = _load_spec(args.spec)
    except ParseError as exc:
        print(f"{args.spec}:{exc.line}:{exc.col}: error: {exc.message}", file=sys.stderr)
        return EXIT_PARSE
    if any(d.severity == "error" for d in diagnostics):
        for diag in diagnostics:
            print(diag.render(args.spec), file=sys.stderr)
        return EXIT_WELL_FORMEDNESS
    chain = fileformats.read_chain(args.chain)
    bad = verify_chain(chain)
    if bad is not None:
        print(f"chain invalid at block {bad.index}: {bad.rejection}", file=sys.stderr)
        return EXIT_VERIFY
    roles: dict[str, list[str]] = {}
    if args.net:
        _, roles = fileformats.read_network_config(args.net)
    org = fileformats.organization_from_roles(spec.context, roles)
    state = evaluate(chain, spec, org)
    report = fileformats.build_report(state, chain, trust_report(state, org))
    fileformats.write_report(report, args.out)
    print(f"{spec.name}: {len(report['instances'])} instances", file=sys.stderr)
    return EXIT_OK


def cmd_verify_chain(args: argparse.Namespace) -> int:
    chain = fileformats.read_chain(args.chain)
    bad = verify_chain(chain)
    if bad is not None:
        print(f"first bad block: {bad.index} ({bad.rejection})", file=sys.stderr)
        return EXIT_VERIFY
    print(f"ok: {len(chain.blocks)} blocks", file=sys.stderr)
    return EXIT_OK


def cmd_trust(args: argparse.Namespace) -> int:
    report = fileformats.read_report(args.report)
    rows = report.get("trust", [])
    for row in rows:
        print(
            f"{row['principal']}\t{row['norm_id']}\t"
            f"s={row['satisfied']}\tv={row['violated']}\t{row['score']:.6f}"
        )
    if not rows:
        print("no trust evidence", file=sys.stderr)
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compacts",
        description="Declarative violable contracts over a simulated permissioned ledger",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and check a compact")
    p.add_argument("spec", help="path to a .cpt file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("run", help="run a scenario end to end and write a report")
    p.add_argument("--spec", required=True)
    p.add_argument("--scenario", required=True, help="JSON Lines event submissions")
    p.add_argument("--net", required=True, help="network config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the gossip seed")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--chain-out", default=None, help="also write the active chain snapshot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate an existing chain snapshot")
    p.add_argument("--chain", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--net", default=None, help="network config JSON (for the role map)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify-chain", help="verify a chain snapshot")
    p.add_argument("chain", help="chain snapshot JSON")
    p.set_defaults(func=cmd_verify_chain)

    p = sub.add_parser("trust", help="print the trust table of a report")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_trust)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
