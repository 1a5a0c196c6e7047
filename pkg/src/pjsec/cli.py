"""Command-line entry point: ``pjsec run`` and ``pjsec verify-token``.

Exit codes: 0 success, 1 invalid token, 2 malformed scenario,
3 unresolved reference, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .errors import EncodingError
from .group import get_group
from .protocol import DEFAULT_MAX_AGE, Token, decode_message, token_verify
from .scenario import ScenarioError, digest_outputs, execute, load_scenario, write_outputs

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_REFERENCE, EXIT_IO = 0, 1, 2, 3, 4


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        sc = load_scenario(args.scenario, seed_override=args.seed)
        outputs = execute(sc)
        written = write_outputs(outputs, args.out or sc.out_dir)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        print(path)
    print(f"digest {digest_outputs(outputs)}")
    return EXIT_OK


def _describe(token: Token) -> list[str]:
    return [
        f"ip        {token.ip.decode(errors='replace')}",
        f"pu_n      {token.pu_n.hex()}",
        f"id_n      {token.id_n}",
        f"id_b      {token.id_b}",
        f"id_v      {token.id_v}",
        f"gamma1    {token.gamma1.hex()}",
        f"timestamp {token.timestamp}",
        f"probe     {token.probe}",
    ]


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        token_bytes = Path(args.token).read_bytes()
        key_bytes = Path(args.pubkey).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        group = get_group(args.group)
    except KeyError:
        print(f"error: unknown group {args.group!r}", file=sys.stderr)
        return EXIT_REFERENCE
    try:
        token = decode_message(token_bytes, group)
        pu_v = group.decode(key_bytes)
    except EncodingError as exc:
        print(f"INVALID: cannot decode ({exc})")
        return EXIT_INVALID
    if not isinstance(token, Token):
        print("INVALID: file does not hold a token")
        return EXIT_INVALID
    print("\n".join(_describe(token)))
    now = int(time.time()) if args.now is None else args.now
    if token_verify(token, pu_v, now, args.max_age, group=group):
        print("VALID")
        return EXIT_OK
    print("INVALID")
    return EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pjsec", description="Secure node-ID assignment "
                                     "simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", help="path to a .scenario file or a bundled scenario name")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default=None,
                     help="output directory (default: the scenario's out_dir, else ./out)")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify-token", help="check a token against a head's public key")
    verify.add_argument("token", help="file holding a wire-encoded token")
    verify.add_argument("pubkey", help="file holding the vicinity head's encoded public key")
    verify.add_argument("--group", default="secp256k1")
    verify.add_argument("--now", type=int, default=None, help="unix time to verify at")
    verify.add_argument("--max-age", type=int, default=DEFAULT_MAX_AGE)
    verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
